/*!
  \file model.hpp
  \brief One-round gate embedding network.

  Every gate gets a structural embedding hs and a functional embedding hf.
  Gates are visited once, level by level; a gate of kind K aggregates its
  fan-ins with attention using the (K, stream) weights and a learned query
  seed.  Structural messages are hs_j, functional messages are [hs_j, hf_j].
*/

#pragma once

#include "gatekit/aig.hpp"
#include "gatekit/grad.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gatekit
{

struct model_config
{
  std::size_t dim{ 64u };
  std::size_t hidden{ 32u };
  std::uint64_t seed{ 0u };
  /*! Orthonormal PI structural embeddings; when false every PI gets the same row. */
  bool pie_enabled{ true };
};

enum class stream
{
  structural,
  functional
};

/*! \brief Query seed and projections of one (gate kind, stream) aggregator. */
struct attention_weights
{
  grad::tensor seed; // 1 x d
  grad::tensor wq;   // d x d
  grad::tensor wk;   // w x d, w = d or 2d
  grad::tensor wv;   // w x d
};

struct mlp_weights
{
  grad::tensor w1, b1, w2, b2;
};

class model
{
public:
  explicit model( model_config const& config );

  model_config const& config() const { return config_; }
  grad::parameter_store& params() { return params_; }
  grad::parameter_store const& params() const { return params_; }

  /*! \brief Aggregator for AND or NOT gates. */
  attention_weights weights( gate_kind kind, stream s ) const;
  grad::tensor const& pi_functional() const { return params_["pi.hf"]; }
  mlp_weights prob_head() const;
  mlp_weights rc_head() const;

private:
  model_config config_;
  grad::parameter_store params_;
};

struct pi_encoding
{
  grad::matrix hs; // num_pi x d
  /*! Set when num_pi > d and the rows are only quasi-orthogonal random unit vectors. */
  bool quasi_orthogonal{ false };
};

/*! \brief Rows of a random orthonormal matrix (num_pi <= d), else random unit vectors. */
pi_encoding init_pi_embeddings( std::size_t num_pi, std::size_t d, std::uint64_t seed );

/*! \brief PI structural rows for `config`: `init_pi_embeddings`, or one repeated row with PIE disabled. */
pi_encoding pi_structural( model_config const& config, std::size_t num_pi, std::uint64_t seed );

/*! \brief Attention over `slots`: slot k holds message k of every target (n x w each); result n x d. */
grad::tensor attention_batch( attention_weights const& w, std::span<grad::tensor const> slots );

/*! \brief Single-target form: messages is m x w, result 1 x d.  Throws `empty_message_list`. */
grad::tensor attention_aggregate( attention_weights const& w, grad::tensor const& messages );

/*! \brief Embeddings of a batch of circuits, stored per global level. */
struct embedding_state
{
  std::vector<grad::tensor> hs_levels;
  std::vector<grad::tensor> hf_levels;
  /*! where[c][n]: level tensor and row of node n of circuit c. */
  std::vector<std::vector<grad::row_ref>> where;
  /*! Number of (gate, stream) aggregations performed. */
  std::size_t aggregations{ 0 };
  bool quasi_orthogonal_pis{ false };

  std::size_t num_circuits() const { return where.size(); }
  grad::tensor hs_rows( std::span<std::pair<std::uint32_t, node_index> const> nodes ) const;
  grad::tensor hf_rows( std::span<std::pair<std::uint32_t, node_index> const> nodes ) const;
  /*! \brief All rows of circuit c as plain matrices (N x d). */
  grad::matrix hs( std::size_t c ) const;
  grad::matrix hf( std::size_t c ) const;
};

/*! \brief Levelized forward pass; `pi_hs[c]` holds the PI structural rows of circuit c in PI order.
    Throws `uninitialized_pis` when a matrix is missing or has the wrong shape. */
embedding_state forward( model const& m, std::span<aig const* const> graphs, std::span<grad::matrix const> pi_hs );

/*! \brief Single circuit with PI rows from `pi_structural( config, num_pis, pi_seed )`. */
embedding_state forward( model const& m, aig const& g, std::uint64_t pi_seed );

/*! \brief sigmoid(MLP_prob(hf)) for every row. */
grad::tensor predict_prob( model const& m, grad::tensor const& hf );
/*! \brief sigmoid(MLP_rc([hs_i, hs_j])) for every row pair. */
grad::tensor predict_rc( model const& m, grad::tensor const& hs_i, grad::tensor const& hs_j );

struct head_values
{
  double prob;
  double rc;
  double sim;
};

/*! \brief Readouts for gates i and j of circuit c. */
head_values predict_heads( model const& m, embedding_state const& state, std::uint32_t c, node_index i, node_index j );

/* checkpoints carry the model configuration as metadata */
grad::checkpoint model_checkpoint( model const& m, grad::adam const* opt = nullptr );
model model_from_checkpoint( grad::checkpoint const& ck );

} // namespace gatekit
