/*!
  \file dataset.hpp
  \brief Training labels (logic probabilities, reconvergence and function
         pairs) and the line-delimited dataset file.
*/

#pragma once

#include "gatekit/aig.hpp"
#include "gatekit/generate.hpp"
#include "gatekit/sim.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gatekit
{

/*! \brief Gate pair labelled with its normalized truth-table distance. */
struct pair_sample
{
  node_index i{};
  node_index j{};
  double dist_tt{};
  bool is_equivalent{};

  friend bool operator==( pair_sample const&, pair_sample const& ) = default;
};

/*! \brief Gate pair labelled with whether the two share a predecessor. */
struct rc_sample
{
  node_index i{};
  node_index j{};
  bool label{};

  friend bool operator==( rc_sample const&, rc_sample const& ) = default;
};

/*! \brief Admission rules for function pairs. */
struct pair_constraints
{
  double max_prob_gap{ 0.05 };
  std::uint32_t max_level_gap{ 5u };
  /*! Keep pairs with distance <= near_dist or >= far_dist. */
  double near_dist{ 0.20 };
  double far_dist{ 0.80 };
};

struct circuit_record
{
  aig graph;
  std::vector<signature> signatures;
  std::vector<double> probs;
  std::vector<pair_sample> pairs;
  std::vector<rc_sample> rc_pairs;
};

struct dataset_config
{
  sim_config sim{};
  std::size_t max_pairs{ 1000u };
  std::size_t max_rc_pairs{ 1000u };
  std::uint64_t seed{ 0u };
  pair_constraints constraints{};
};

/*! \brief Simulated record without pairs; the AIG is canonicalized first. */
circuit_record simulate_record( aig const& g, sim_config const& sim );

/*! \brief Simulate and sample both pair kinds. */
circuit_record make_record( aig const& g, dataset_config const& config );

/*! \brief True when gates `i` and `j` of `record` pass all four admission rules. */
bool admissible_pair( circuit_record const& record, fanin_index const& index, node_index i, node_index j, pair_constraints const& c = {} );

/*! \brief Up to `max_pairs` admissible gate pairs, drawn without replacement, sorted by (i, j). */
std::vector<pair_sample> sample_function_pairs( circuit_record const& record, std::size_t max_pairs, std::uint64_t seed,
                                                pair_constraints const& c = {} );

/*! \brief Class-balanced reconvergence pairs among gates at most `max_level_gap` levels apart. */
std::vector<rc_sample> sample_rc_pairs( circuit_record const& record, std::size_t max_pairs, std::uint64_t seed, std::uint32_t max_level_gap = 5u );

/*! \brief Synthetic corpus: circuit k uses generator seed `seed + k`; sizes vary around `base`. */
std::vector<circuit_record> synthetic_corpus( std::size_t count, random_aig_config const& base, dataset_config const& config );

void write_dataset( std::span<circuit_record const> records, std::string const& path );
std::vector<circuit_record> read_dataset( std::string const& path );

/*! \brief In-memory variants of the file format. */
std::string serialize_dataset( std::span<circuit_record const> records );
std::vector<circuit_record> parse_dataset( std::string const& text );

} // namespace gatekit
