/*!
  \file cli.hpp
  \brief Command-line front end: run configuration and subcommand dispatch.
*/

#pragma once

#include "gatekit/dataset.hpp"
#include "gatekit/model.hpp"
#include "gatekit/sweep.hpp"
#include "gatekit/train.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace gatekit::cli
{

/*! \brief Every tunable of a run; read from `key=value` lines. */
struct run_config
{
  std::uint64_t seed{ 0u };
  std::size_t patterns{ 15000u };
  std::size_t dim{ 64u };
  double lr{ 1e-4 };
  double weight_decay{ 1e-10 };
  std::size_t batch{ 16u };
  std::size_t epochs_stage1{ 20u };
  std::size_t epochs_stage2{ 40u };
  double w_prob{ 1.0 };
  double w_rc{ 1.0 };
  double w_func{ 1.0 };
  double delta{ 1e-5 };
  bool pie_enabled{ true };
  bool multistage_enabled{ true };
  /* budgets; 0 means unlimited */
  std::uint64_t conflict_budget{ 10000u };
  std::size_t max_sat_calls{ 0u };
  std::uint64_t max_conflicts{ 0u };

  /*! \brief Set one key.  Throws `bad_config` for unknown keys and unparsable values. */
  void set( std::string_view key, std::string_view value );

  sim_config sim() const { return { patterns, seed }; }
  dataset_config dataset() const;
  model_config model() const;
  train_config train() const;
  sweep_config sweep() const;
};

/*! \brief Apply `key=value` lines; blank lines and `#` comments are skipped. */
void apply_config_text( run_config& c, std::string_view text );

/*! \brief Every key with its resolved value, one `key=value` line each, in a fixed order. */
std::string resolved_config( run_config const& c );

/*! \brief Run one subcommand.  Returns 0 on success, 1 on usage errors, 2 on runtime errors,
    and 10 / 20 for `solve` results SAT / UNSAT. */
int run( std::vector<std::string> const& args, std::ostream& out, std::ostream& err );

} // namespace gatekit::cli
