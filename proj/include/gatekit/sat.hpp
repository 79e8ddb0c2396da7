/*!
  \file sat.hpp
  \brief CNF encoding of AIG cones and miters, and a CDCL solver with an
         embedding-similarity decision hook.
*/

#pragma once

#include "gatekit/aig.hpp"
#include "gatekit/grad.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gatekit
{

/*! \brief Clauses over variables 1..num_vars; literals are signed DIMACS integers. */
struct cnf
{
  std::uint32_t num_vars{ 0u };
  std::vector<std::vector<int>> clauses;
  /*! var_of_node[n] is the variable of node n, 0 when the node is not encoded. */
  std::vector<std::uint32_t> var_of_node;
};

/*! \brief Encode the cone of `node` and assert it equals `value`.

  Every PI gets a variable (1..num_pis in PI order) whether or not it is in
  the cone, so a model always holds a complete input pattern.
*/
cnf tseitin( aig const& g, node_index node, bool value );

/*! \brief Satisfiable iff some input pattern makes `a` and `b` differ.  Throws `identical_nodes`, `unknown_node`. */
cnf miter( aig const& g, node_index a, node_index b );

/*! \brief PI pattern (in PI order) read from a model of a `tseitin` or `miter` formula. */
std::vector<bool> input_pattern( aig const& g, cnf const& f, std::vector<bool> const& model );

std::string write_dimacs( cnf const& f );
/*! \brief Throws `malformed_clause` on bad headers, out-of-range literals or unterminated clauses. */
cnf parse_dimacs( std::string const& text );

/*! \brief Per-variable neighbour lists of variables whose embeddings have cosine similarity above 1 - delta. */
class similarity_index
{
public:
  explicit similarity_index( std::uint32_t num_vars = 0u, double delta = 1e-5 );

  /*! \brief Rows of `hf` are node embeddings; variables of `f.var_of_node` pick them up. */
  static similarity_index from_embeddings( cnf const& f, grad::matrix const& hf, double delta = 1e-5 );

  /*! \brief Symmetric link, ignored for self pairs. */
  void link( std::uint32_t a, std::uint32_t b );

  std::vector<std::uint32_t> const& neighbors( std::uint32_t var ) const;
  std::uint32_t num_vars() const noexcept { return static_cast<std::uint32_t>( adj_.size() ) - 1u; }
  double delta() const noexcept { return delta_; }
  std::size_t num_links() const noexcept;

private:
  double delta_;
  std::vector<std::vector<std::uint32_t>> adj_; // index 0 unused
};

enum class sat_status
{
  sat,
  unsat,
  unknown // conflict budget exhausted
};

std::string_view to_string( sat_status s ) noexcept;

struct solver_options
{
  /*! 0 means unlimited. */
  std::uint64_t max_conflicts{ 0u };
  /*! Polarity of a variable decided for the first time. */
  bool initial_phase{ false };
  /*! Keep a copy of every learned clause in the result. */
  bool record_learned{ false };
  std::uint32_t restart_unit{ 100u };
};

struct solver_stats
{
  std::uint64_t decisions{ 0u };
  std::uint64_t conflicts{ 0u };
  std::uint64_t propagations{ 0u };
  std::uint64_t restarts{ 0u };
  std::uint64_t hook_assignments{ 0u };
  std::uint64_t learned{ 0u };
};

struct solve_result
{
  sat_status status{ sat_status::unknown };
  /*! model[v] for v in 1..num_vars when SAT; index 0 unused. */
  std::vector<bool> model;
  solver_stats stats;
  std::vector<std::vector<int>> learned;
};

/*! \brief CDCL search.  With `index`, each heap decision s = v is followed by decisions s' = !v
    for the unassigned neighbours of s, one level each.  Throws `malformed_clause`. */
solve_result solve( cnf const& f, similarity_index const* index = nullptr, solver_options const& options = {} );

std::string stats_json( solve_result const& r );

} // namespace gatekit
