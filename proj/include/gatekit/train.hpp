/*!
  \file train.hpp
  \brief Losses, the two-stage training schedule and evaluation metrics.
*/

#pragma once

#include "gatekit/dataset.hpp"
#include "gatekit/grad.hpp"
#include "gatekit/model.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gatekit
{

struct train_config
{
  std::size_t epochs_stage1{ 20u };
  std::size_t epochs_stage2{ 40u };
  std::size_t batch_size{ 16u };
  double w_prob{ 1.0 };
  double w_rc{ 1.0 };
  double w_func{ 1.0 };
  /*! When false every epoch optimizes the full objective (no curriculum). */
  bool multistage{ true };
  /*! Draw fresh PI structural rows every epoch instead of fixing them per circuit. */
  bool resample_pis{ false };
  std::uint64_t seed{ 0u };
  grad::adam_config optimizer{};
};

/*! \brief Σ |ZeroNorm(D^T) - ZeroNorm(D^H)| with ZeroNorm = subtract the batch mean.  Throws `too_few_pairs`. */
grad::tensor loss_functionality( std::span<double const> dist_tt, grad::tensor const& dist_h );

struct loss_parts
{
  grad::tensor total;
  double prob{ 0.0 };
  double rc{ 0.0 };
  double func{ 0.0 }; // 0 when not part of the objective
};

/*! \brief Stage-1 (prob + rc) or stage-2 (+ func) objective of a forward pass over `batch`.
    Throws `missing_labels` when a weighted task has no labels in the batch. */
loss_parts loss_stage( model const& m, std::span<circuit_record const* const> batch, embedding_state const& state, int stage, train_config const& config );

/*! \brief PI structural rows used for training record `index`; `epoch` is 0 unless rows are redrawn per epoch. */
grad::matrix training_pi_rows( model_config const& config, circuit_record const& r, std::uint64_t seed, std::size_t epoch, std::size_t index );
grad::matrix evaluation_pi_rows( model_config const& config, circuit_record const& r, std::size_t index );

/*! \brief hf of every node of `g` (N x d), PI rows as for evaluation record 0. */
grad::matrix functional_embeddings( model const& m, aig const& g );

/* evaluation */

struct scored_pair
{
  double sim;
  bool positive;
};

struct eval_report
{
  double pe{ 0.0 };
  double recall{ 0.0 };
  double precision{ 0.0 };
  double f1{ 0.0 };
  double auc{ 0.0 };
  double threshold{ 0.0 };
  std::size_t tp{ 0 }, tn{ 0 }, fp{ 0 }, fn{ 0 };
};

/*! \brief Threshold maximizing TPR - FPR for the rule sim > θ.  Throws `no_positive_pairs`. */
double select_threshold( std::span<scored_pair const> pairs );

/*! \brief Confusion counts, precision, recall and F1 for sim > θ, plus the ROC AUC.  Throws `no_positive_pairs`. */
eval_report classify( std::span<scored_pair const> pairs, double threshold );

/*! \brief Area under the ROC curve (rank statistic with tied scores sharing ranks). */
double roc_auc( std::span<scored_pair const> pairs );

/*! \brief Model similarity of every function pair of `records`. */
std::vector<scored_pair> score_pairs( model const& m, std::span<circuit_record const> records, std::size_t batch_size = 16u );

/*! \brief Mean |P - P̂| over all gates of `records`. */
double prediction_error( model const& m, std::span<circuit_record const> records, std::size_t batch_size = 16u );

/*! \brief Threshold chosen on `validation`, metrics measured on `test`. */
eval_report evaluate( model const& m, std::span<circuit_record const> test, std::span<circuit_record const> validation );

/* training */

struct epoch_log
{
  std::size_t epoch{ 0 };
  int stage{ 1 };
  double l_prob{ 0.0 };
  double l_rc{ 0.0 };
  double l_func{ 0.0 };
  /* validation metrics; NaN when there is no validation split */
  double pe{ 0.0 };
  double f1{ 0.0 };
  double auc{ 0.0 };
};

class trainer
{
public:
  trainer( model& m, train_config const& config, std::span<circuit_record const> train, std::span<circuit_record const> validation = {} );

  std::size_t epoch() const { return epoch_; }
  std::size_t total_epochs() const { return config_.epochs_stage1 + config_.epochs_stage2; }
  int stage_of( std::size_t epoch ) const;

  /*! \brief One pass over the shuffled training split.  Throws `divergence_detected`. */
  epoch_log run_epoch();

  /*! \brief Loss of every optimizer step taken so far. */
  std::vector<double> const& step_losses() const { return step_losses_; }

  grad::adam const& optimizer() const { return opt_; }

  /*! \brief Model, optimizer and epoch counter. */
  grad::checkpoint save() const;
  void restore( grad::checkpoint const& ck );

private:
  model& m_;
  train_config config_;
  std::span<circuit_record const> train_;
  std::span<circuit_record const> validation_;
  grad::adam opt_;
  std::size_t epoch_{ 0 };
  std::vector<double> step_losses_;
};

struct train_result
{
  std::vector<epoch_log> curve;
  /*! Checkpoint taken after the last stage-1 epoch (multistage only). */
  std::optional<grad::checkpoint> stage1;
  grad::checkpoint final_state;
};

/*! \brief Full schedule: stage 1 for epochs_stage1, then stage 2 continuing with the same optimizer.
    Throws `empty_corpus`. */
train_result train_multistage( std::span<circuit_record const> train, model& m, train_config const& config,
                               std::span<circuit_record const> validation = {} );

/*! \brief CSV with header epoch,stage,L_prob,L_rc,L_func,PE,F1,AUC. */
std::string metrics_csv( std::span<epoch_log const> curve );

std::string report_json( eval_report const& r );

} // namespace gatekit
