/*!
  \file aig.hpp
  \brief And-Inverter Graph with explicit NOT nodes, AIGER I/O and cone queries.

  Node ids are dense and follow a topological order: every fan-in id is
  smaller than the id of its consumer. Complemented AIGER literals are
  materialized as NOT nodes, at most one NOT per source node.
*/

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/dynamic_bitset.hpp>

namespace gatekit
{

using node_index = std::uint32_t;

enum class gate_kind : std::uint8_t
{
  pi,
  and_gate,
  not_gate
};

constexpr std::size_t fanin_count( gate_kind kind ) noexcept
{
  switch ( kind )
  {
  case gate_kind::pi: return 0u;
  case gate_kind::not_gate: return 1u;
  case gate_kind::and_gate: return 2u;
  }
  return 0u;
}

std::string_view to_string( gate_kind kind ) noexcept;

struct aig_node
{
  gate_kind kind{ gate_kind::pi };
  std::array<node_index, 2> fanin{};

  std::span<node_index const> fanins() const noexcept { return { fanin.data(), fanin_count( kind ) }; }
};

class aig_builder;

/*! \brief Immutable combinational AIG. */
class aig
{
public:
  aig() = default;

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t num_pis() const noexcept { return pis_.size(); }
  std::size_t num_pos() const noexcept { return pos_.size(); }
  std::size_t num_ands() const noexcept;
  std::size_t num_nots() const noexcept;
  std::size_t num_gates() const noexcept { return size() - num_pis(); }

  aig_node const& node( node_index n ) const { return nodes_.at( n ); }
  gate_kind kind( node_index n ) const { return nodes_.at( n ).kind; }
  std::span<node_index const> fanins( node_index n ) const { return nodes_.at( n ).fanins(); }
  bool is_pi( node_index n ) const { return kind( n ) == gate_kind::pi; }

  std::span<aig_node const> nodes() const noexcept { return nodes_; }
  std::span<node_index const> pis() const noexcept { return pis_; }
  std::span<node_index const> pos() const noexcept { return pos_; }
  std::span<std::uint32_t const> levels() const noexcept { return levels_; }
  std::uint32_t level( node_index n ) const { return levels_.at( n ); }
  std::uint32_t depth() const noexcept { return depth_; }

  /*! \brief Position of PI `n` within `pis()`, or -1 for non-PI nodes. */
  std::int64_t pi_position( node_index n ) const { return pi_position_.at( n ); }

  /*! \brief Node ids grouped by level; group 0 holds the PIs. */
  std::vector<std::vector<node_index>> nodes_by_level() const;

  /*! \brief Fan-out lists for every node. */
  std::vector<std::vector<node_index>> fanouts() const;

  void check_node( node_index n ) const;

private:
  friend class aig_builder;

  std::vector<aig_node> nodes_;
  std::vector<node_index> pis_;
  std::vector<node_index> pos_;
  std::vector<std::uint32_t> levels_;
  std::vector<std::int64_t> pi_position_;
  std::uint32_t depth_{ 0 };
};

/*! \brief Appends nodes in topological order; NOTs are deduplicated per source. */
class aig_builder
{
public:
  node_index add_pi();
  node_index add_and( node_index a, node_index b );
  node_index add_not( node_index a );
  void add_po( node_index n );

  std::size_t size() const noexcept { return nodes_.size(); }
  gate_kind kind( node_index n ) const { return nodes_.at( n ).kind; }
  std::span<node_index const> fanins( node_index n ) const { return nodes_.at( n ).fanins(); }

  aig build() &&;

private:
  void check( node_index n ) const;

  std::vector<aig_node> nodes_;
  std::vector<node_index> pis_;
  std::vector<node_index> pos_;
  std::vector<node_index> not_of_; // source -> its NOT child, or npos
};

/*! \brief Longest-path levels: PIs at 0, gates at 1 + max fan-in level. */
std::vector<std::uint32_t> levelize( aig const& g );

/*! \brief Logic cone rooted at a node. Both sets are sorted ascending. */
struct cone
{
  node_index root{};
  std::vector<node_index> support;
  std::vector<node_index> gates;
};

cone support( aig const& g, node_index n );

/*! \brief Transitive fan-in of `i` and `j`, each excluding the node itself, intersect. */
bool has_common_predecessor( aig const& g, node_index i, node_index j );

/*! \brief Sub-circuit of the cone of `root` with `root` as its single PO.

  PIs keep the relative order they have in the parent circuit.
*/
aig extract_cone( aig const& g, node_index root );

/*! \brief Per-node bitsets for bulk structural queries. */
class fanin_index
{
public:
  explicit fanin_index( aig const& g );

  /*! \brief Support as a bitset over PI positions. */
  boost::dynamic_bitset<> const& support( node_index n ) const { return support_.at( n ); }

  /*! \brief Strict transitive fan-in as a bitset over node ids. */
  boost::dynamic_bitset<> const& strict_tfi( node_index n ) const { return tfi_.at( n ); }

  bool common_predecessor( node_index i, node_index j ) const;

private:
  std::vector<boost::dynamic_bitset<>> support_;
  std::vector<boost::dynamic_bitset<>> tfi_;
};

/*! \brief Parse an ASCII AIGER (`aag`) document. */
aig parse_aiger( std::string_view text );
aig read_aiger( std::string const& path );

/*! \brief Serialize as ASCII AIGER.

  AIGER has no buffers, so a NOT whose fan-in is a NOT collapses onto the
  double-complemented source literal.
*/
std::string write_aiger( aig const& g );
void write_aiger( aig const& g, std::string const& path );

/*! \brief `parse_aiger(write_aiger(g))`: the numbering every file-based tool sees. */
aig canonicalize( aig const& g );

} // namespace gatekit
