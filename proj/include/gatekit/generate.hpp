#pragma once

#include "gatekit/aig.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace gatekit
{

/*! \brief Knobs for synthetic corpus circuits. */
struct random_aig_config
{
  std::size_t num_pis{ 8u };
  /*! Upper bound on AND + NOT nodes. */
  std::size_t max_gates{ 60u };
  /*! Probability that a fan-in edge is complemented. */
  double complement_prob{ 0.35 };
  /*! Probability that a step adds a rewritten copy of an existing gate. */
  double redundancy{ 0.25 };
  std::uint64_t seed{ 0u };
};

/*! \brief Random constant-free AIG in canonical (AIGER) numbering.

  Besides random AND gates the generator re-derives existing gates through
  commutation, reassociation and absorption, which plants functionally
  equivalent but structurally different node pairs. Nodes without fan-out
  become POs.
*/
aig random_aig( random_aig_config const& config );

struct duplicated_aig
{
  aig graph;
  /*! AND count of the circuit the copies were made from. */
  std::size_t reference_ands{ 0u };
  std::size_t injected_ands{ 0u };
  /*! (original, copy) root pairs. */
  std::vector<std::pair<node_index, node_index>> roots;
};

/*! \brief Append copies of the cones of `count` distinct random gates, with commuted AND fan-ins.

  Original nodes keep their ids and POs; each copy root becomes an extra PO.
*/
duplicated_aig inject_duplicate_cones( aig const& g, std::size_t count, std::uint64_t seed );

} // namespace gatekit
