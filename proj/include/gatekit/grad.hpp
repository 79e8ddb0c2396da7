/*!
  \file grad.hpp
  \brief Small dense reverse-mode differentiation engine and Adam.

  Tensors are 2-D row-major matrices of doubles.  Every op records itself on
  the result when any input requires a gradient; `backward` walks the
  recorded graph in reverse creation order.
*/

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gatekit::grad
{

using matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class tensor
{
public:
  tensor() = default;

  /*! \brief Leaf without gradient.  Throws `non_finite_input` on NaN/Inf. */
  static tensor constant( matrix value );
  /*! \brief Trainable leaf; its gradient accumulates across `backward` calls. */
  static tensor parameter( matrix value );
  static tensor scalar( double value );

  bool defined() const { return n_ != nullptr; }
  std::size_t rows() const;
  std::size_t cols() const;
  bool requires_grad() const;

  matrix const& value() const;
  /*! \brief Direct access for optimizers and checkpoint loading. */
  matrix& mutable_value();
  double item() const;

  /*! \brief Gradient; zero-filled when nothing has been accumulated yet. */
  matrix grad() const;
  bool has_grad() const;
  void zero_grad();

  struct node;
  explicit tensor( std::shared_ptr<node> n ) : n_( std::move( n ) ) {}
  node& impl() const { return *n_; }
  std::shared_ptr<node> const& handle() const { return n_; }

private:
  std::shared_ptr<node> n_;
};

struct tensor::node
{
  matrix value;
  matrix grad; // empty until first accumulation
  bool requires_grad{ false };
  std::uint64_t seq{ 0 };
  std::vector<std::shared_ptr<node>> parents;
  std::function<void( node& )> backprop;

  void accumulate( matrix const& g );
};

/* the op vocabulary */

tensor matmul( tensor const& a, tensor const& b );
tensor transpose( tensor const& a );
tensor add( tensor const& a, tensor const& b );
tensor sub( tensor const& a, tensor const& b );
/*! \brief Elementwise product. */
tensor mul( tensor const& a, tensor const& b );
tensor scale( tensor const& a, double s );
/*! \brief Adds the 1 x c row `r` to every row of `a`. */
tensor add_row( tensor const& a, tensor const& r );
/*! \brief Multiplies row k of `a` by `s(k, 0)`. */
tensor mul_col( tensor const& a, tensor const& s );
/*! \brief Scalar (1 x 1) `s` repeated into a rows x cols matrix. */
tensor broadcast( tensor const& s, std::size_t rows, std::size_t cols );

tensor concat_cols( tensor const& a, tensor const& b );
tensor concat_rows( std::span<tensor const> parts );
/*! \brief Column k of `a` as an n x 1 tensor. */
tensor column( tensor const& a, std::size_t k );

/*! \brief Row selected by (source tensor, row) for `gather_rows`. */
struct row_ref
{
  std::uint32_t source;
  std::uint32_t row;
};
tensor gather_rows( std::span<tensor const> sources, std::span<row_ref const> rows );

tensor row_softmax( tensor const& a );
tensor relu( tensor const& a );
tensor sigmoid( tensor const& a );
tensor abs( tensor const& a );

tensor sum( tensor const& a );
tensor mean( tensor const& a );
/*! \brief Row-wise cosine similarity of two n x c tensors; n x 1 result.  Throws `zero_vector_cosine`. */
tensor cosine_rows( tensor const& a, tensor const& b );
/*! \brief Mean binary cross-entropy of predictions in [0,1] against constant targets; logs clamp at -100. */
tensor bce_mean( tensor const& pred, matrix const& target );

/*! \brief Populates gradients of all trainable ancestors of a 1 x 1 `loss`.  Throws `non_scalar_loss`. */
void backward( tensor const& loss );

/*! \brief Ordered name -> parameter map. */
class parameter_store
{
public:
  tensor const& add( std::string const& name, matrix value );
  tensor const& operator[]( std::string const& name ) const;
  bool contains( std::string const& name ) const;
  std::vector<std::string> const& names() const { return names_; }
  std::vector<tensor> tensors() const;
  std::size_t num_scalars() const;
  void zero_grad();

private:
  std::vector<std::string> names_;
  std::map<std::string, tensor> by_name_;
};

struct adam_config
{
  double lr{ 1e-4 };
  double beta1{ 0.9 };
  double beta2{ 0.999 };
  double eps{ 1e-8 };
  double weight_decay{ 1e-10 };
};

class adam
{
public:
  adam( adam_config const& config, std::vector<tensor> params );

  /*! \brief One bias-corrected update with decoupled weight decay applied first. */
  void step();
  void zero_grad();

  adam_config const& config() const { return config_; }
  adam_config& config() { return config_; }
  std::uint64_t step_count() const { return steps_; }

  /* state access for checkpoints */
  std::vector<matrix> const& first_moments() const { return m_; }
  std::vector<matrix> const& second_moments() const { return v_; }
  void set_state( std::uint64_t steps, std::vector<matrix> m, std::vector<matrix> v );

private:
  adam_config config_;
  std::vector<tensor> params_;
  std::vector<matrix> m_;
  std::vector<matrix> v_;
  std::uint64_t steps_{ 0 };
};

/*! \brief Checkpoint contents: parameters, optional optimizer state and string metadata. */
struct checkpoint
{
  std::vector<std::pair<std::string, matrix>> params;
  bool has_optimizer{ false };
  adam_config optimizer{};
  std::uint64_t steps{ 0 };
  std::vector<matrix> m;
  std::vector<matrix> v;
  std::map<std::string, std::string> meta;
};

checkpoint make_checkpoint( parameter_store const& store, adam const* opt = nullptr, std::map<std::string, std::string> meta = {} );
/*! \brief Copies values into `store` (names and shapes must match) and optionally restores `opt`. */
void restore_checkpoint( checkpoint const& ck, parameter_store& store, adam* opt = nullptr );

std::string serialize_checkpoint( checkpoint const& ck );
checkpoint parse_checkpoint( std::string const& text );
void write_checkpoint( checkpoint const& ck, std::string const& path );
checkpoint read_checkpoint( std::string const& path );

} // namespace gatekit::grad
