/*!
  \file sweep.hpp
  \brief SAT sweeping: simulation classes, similarity-ranked miter checks,
         counterexample refinement and merging of proven equivalences.
*/

#pragma once

#include "gatekit/aig.hpp"
#include "gatekit/grad.hpp"
#include "gatekit/sim.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace gatekit
{

/*! \brief Nodes whose signatures agree on every pattern seen so far (ascending ids). */
struct equiv_class
{
  std::vector<node_index> members;
  friend bool operator==( equiv_class const&, equiv_class const& ) = default;
};

struct sweep_stats
{
  std::size_t sat_calls{ 0u };
  std::size_t sat_sat{ 0u };
  std::size_t sat_unsat{ 0u };
  std::size_t sat_unknown{ 0u };
  std::size_t merges{ 0u };
  std::size_t refinements{ 0u };
  std::size_t ands_before{ 0u };
  std::size_t ands_after{ 0u };
  bool budget_exhausted{ false };
  double runtime_seconds{ 0.0 };
};

struct sweep_state
{
  aig graph;
  /*! Per-node responses to every pattern applied so far (initial ones plus counterexamples). */
  std::vector<signature> signatures;
  std::vector<equiv_class> classes;
  /*! representative[n] == n unless n was merged; representatives are never merged themselves. */
  std::vector<node_index> representative;
  sweep_stats stats;
};

/*! \brief Group nodes by signature under `input_patterns( num_pis, sim )`, dropping singletons. */
sweep_state initial_classes( aig const& g, sim_config const& sim );

/*! \brief All intra-class pairs (i < j).

  With `hf` (one embedding row per node) pairs are sorted by descending cosine
  similarity, then smaller level sum, then ids; without it they come in class
  order, then lexicographically.  Throws `model_embedding_missing` when `hf`
  has fewer rows than the circuit has nodes.
*/
std::vector<std::pair<node_index, node_index>> rank_candidate_pairs( sweep_state const& state, grad::matrix const* hf );

/*! \brief Append one pattern (PI order) and split every class by the new bit.  Throws `incomplete_pattern`. */
void refine_with_counterexample( sweep_state& state, std::vector<bool> const& pattern );

/*! \brief Classes recomputed from scratch over the accumulated signatures, merged nodes excluded. */
std::vector<equiv_class> regroup( sweep_state const& state );

struct sweep_config
{
  sim_config sim{ 64u, 0u };
  /*! Per-miter conflict limit; pairs that hit it are retried once after all other pairs. */
  std::uint64_t conflict_budget{ 10000u };
  /*! Stop after this many SAT calls; 0 validates every candidate pair. */
  std::size_t max_sat_calls{ 0u };
};

struct sweep_result
{
  aig graph;
  sweep_stats stats;
  /*! Output equivalence check: exhaustive up to 16 PIs, else 2^20 random patterns. */
  bool verified{ false };
};

/*! \brief Sweep `g`; `hf` (optional) ranks candidate pairs. */
sweep_result sweep( aig const& g, grad::matrix const* hf, sweep_config const& config );

/*! \brief Live nodes only, fan-ins redirected to representatives, logic without a path to a PO removed. */
aig rebuild_reduced( aig const& g, std::vector<node_index> const& representative );

/*! \brief True when every PO of `a` equals the same PO of `b` (same PI count and order required). */
bool outputs_equivalent( aig const& a, aig const& b, std::uint64_t seed = 0u );

std::string sweep_stats_json( sweep_stats const& s );

} // namespace gatekit
