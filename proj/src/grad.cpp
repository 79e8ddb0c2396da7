#include "gatekit/grad.hpp"

#include "gatekit/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace gatekit::grad
{

namespace
{

std::atomic<std::uint64_t> next_seq{ 1u };

void check_finite( matrix const& m, char const* what )
{
  if ( !m.allFinite() )
  {
    throw error( errc::non_finite_input, std::string( "non-finite value in " ) + what );
  }
}

std::string shape_str( matrix const& m )
{
  return std::to_string( m.rows() ) + "x" + std::to_string( m.cols() );
}

void require( bool ok, char const* op, matrix const& a, matrix const& b )
{
  if ( !ok )
  {
    throw error( errc::shape_mismatch, std::string( op ) + ": " + shape_str( a ) + " vs " + shape_str( b ) );
  }
}

using node = tensor::node;

tensor record( matrix value, char const* op, std::initializer_list<tensor const*> inputs, std::function<void( node& )> bp )
{
  check_finite( value, op );
  auto n = std::make_shared<node>();
  n->value = std::move( value );
  n->seq = next_seq.fetch_add( 1u );
  for ( auto const* t : inputs )
  {
    n->requires_grad = n->requires_grad || t->requires_grad();
  }
  if ( n->requires_grad )
  {
    for ( auto const* t : inputs )
    {
      n->parents.push_back( t->handle() );
    }
    n->backprop = std::move( bp );
  }
  return tensor( std::move( n ) );
}

} // namespace

void tensor::node::accumulate( matrix const& g )
{
  if ( grad.size() == 0 )
  {
    grad = g;
  }
  else
  {
    grad += g;
  }
}

tensor tensor::constant( matrix value )
{
  check_finite( value, "constant" );
  auto n = std::make_shared<node>();
  n->value = std::move( value );
  n->seq = next_seq.fetch_add( 1u );
  return tensor( std::move( n ) );
}

tensor tensor::parameter( matrix value )
{
  auto t = constant( std::move( value ) );
  t.n_->requires_grad = true;
  return t;
}

tensor tensor::scalar( double value )
{
  matrix m( 1, 1 );
  m( 0, 0 ) = value;
  return constant( std::move( m ) );
}

std::size_t tensor::rows() const { return static_cast<std::size_t>( n_->value.rows() ); }
std::size_t tensor::cols() const { return static_cast<std::size_t>( n_->value.cols() ); }
bool tensor::requires_grad() const { return n_ && n_->requires_grad; }
matrix const& tensor::value() const { return n_->value; }
matrix& tensor::mutable_value() { return n_->value; }

double tensor::item() const
{
  if ( n_->value.size() != 1 )
  {
    throw error( errc::shape_mismatch, "item() on " + shape_str( n_->value ) );
  }
  return n_->value( 0, 0 );
}

matrix tensor::grad() const
{
  if ( n_->grad.size() == 0 )
  {
    return matrix::Zero( n_->value.rows(), n_->value.cols() );
  }
  return n_->grad;
}

bool tensor::has_grad() const { return n_->grad.size() != 0; }
void tensor::zero_grad() { n_->grad.resize( 0, 0 ); }

/* ops */

tensor matmul( tensor const& a, tensor const& b )
{
  require( a.cols() == b.rows(), "matmul", a.value(), b.value() );
  return record( a.value() * b.value(), "matmul", { &a, &b }, []( node& self ) {
    auto& x = *self.parents[0];
    auto& y = *self.parents[1];
    if ( x.requires_grad )
    {
      x.accumulate( self.grad * y.value.transpose() );
    }
    if ( y.requires_grad )
    {
      y.accumulate( x.value.transpose() * self.grad );
    }
  } );
}

tensor transpose( tensor const& a )
{
  return record( a.value().transpose(), "transpose", { &a }, []( node& self ) {
    self.parents[0]->accumulate( self.grad.transpose() );
  } );
}

tensor add( tensor const& a, tensor const& b )
{
  require( a.rows() == b.rows() && a.cols() == b.cols(), "add", a.value(), b.value() );
  return record( a.value() + b.value(), "add", { &a, &b }, []( node& self ) {
    for ( auto& p : self.parents )
    {
      if ( p->requires_grad )
      {
        p->accumulate( self.grad );
      }
    }
  } );
}

tensor sub( tensor const& a, tensor const& b )
{
  require( a.rows() == b.rows() && a.cols() == b.cols(), "sub", a.value(), b.value() );
  return record( a.value() - b.value(), "sub", { &a, &b }, []( node& self ) {
    if ( self.parents[0]->requires_grad )
    {
      self.parents[0]->accumulate( self.grad );
    }
    if ( self.parents[1]->requires_grad )
    {
      self.parents[1]->accumulate( -self.grad );
    }
  } );
}

tensor mul( tensor const& a, tensor const& b )
{
  require( a.rows() == b.rows() && a.cols() == b.cols(), "mul", a.value(), b.value() );
  return record( a.value().cwiseProduct( b.value() ), "mul", { &a, &b }, []( node& self ) {
    auto& x = *self.parents[0];
    auto& y = *self.parents[1];
    if ( x.requires_grad )
    {
      x.accumulate( self.grad.cwiseProduct( y.value ) );
    }
    if ( y.requires_grad )
    {
      y.accumulate( self.grad.cwiseProduct( x.value ) );
    }
  } );
}

tensor scale( tensor const& a, double s )
{
  return record( a.value() * s, "scale", { &a }, [s]( node& self ) {
    self.parents[0]->accumulate( self.grad * s );
  } );
}

tensor add_row( tensor const& a, tensor const& r )
{
  require( r.rows() == 1u && r.cols() == a.cols(), "add_row", a.value(), r.value() );
  matrix out = a.value();
  out.rowwise() += r.value().row( 0 );
  return record( std::move( out ), "add_row", { &a, &r }, []( node& self ) {
    if ( self.parents[0]->requires_grad )
    {
      self.parents[0]->accumulate( self.grad );
    }
    if ( self.parents[1]->requires_grad )
    {
      self.parents[1]->accumulate( self.grad.colwise().sum() );
    }
  } );
}

tensor mul_col( tensor const& a, tensor const& s )
{
  require( s.cols() == 1u && s.rows() == a.rows(), "mul_col", a.value(), s.value() );
  matrix out = a.value();
  for ( Eigen::Index k = 0; k < out.rows(); ++k )
  {
    out.row( k ) *= s.value()( k, 0 );
  }
  return record( std::move( out ), "mul_col", { &a, &s }, []( node& self ) {
    auto& x = *self.parents[0];
    auto& c = *self.parents[1];
    if ( x.requires_grad )
    {
      matrix g = self.grad;
      for ( Eigen::Index k = 0; k < g.rows(); ++k )
      {
        g.row( k ) *= c.value( k, 0 );
      }
      x.accumulate( g );
    }
    if ( c.requires_grad )
    {
      c.accumulate( self.grad.cwiseProduct( x.value ).rowwise().sum() );
    }
  } );
}

tensor broadcast( tensor const& s, std::size_t rows, std::size_t cols )
{
  require( s.rows() == 1u && s.cols() == 1u, "broadcast", s.value(), s.value() );
  matrix out = matrix::Constant( static_cast<Eigen::Index>( rows ), static_cast<Eigen::Index>( cols ), s.value()( 0, 0 ) );
  return record( std::move( out ), "broadcast", { &s }, []( node& self ) {
    matrix g( 1, 1 );
    g( 0, 0 ) = self.grad.sum();
    self.parents[0]->accumulate( g );
  } );
}

tensor concat_cols( tensor const& a, tensor const& b )
{
  require( a.rows() == b.rows(), "concat_cols", a.value(), b.value() );
  matrix out( a.value().rows(), a.value().cols() + b.value().cols() );
  out << a.value(), b.value();
  auto const ca = a.value().cols();
  return record( std::move( out ), "concat_cols", { &a, &b }, [ca]( node& self ) {
    if ( self.parents[0]->requires_grad )
    {
      self.parents[0]->accumulate( self.grad.leftCols( ca ) );
    }
    if ( self.parents[1]->requires_grad )
    {
      self.parents[1]->accumulate( self.grad.rightCols( self.grad.cols() - ca ) );
    }
  } );
}

tensor concat_rows( std::span<tensor const> parts )
{
  if ( parts.empty() )
  {
    throw error( errc::shape_mismatch, "concat_rows of nothing" );
  }
  Eigen::Index rows = 0;
  for ( auto const& p : parts )
  {
    require( p.cols() == parts[0].cols(), "concat_rows", parts[0].value(), p.value() );
    rows += p.value().rows();
  }
  matrix out( rows, parts[0].value().cols() );
  Eigen::Index at = 0;
  bool rg = false;
  for ( auto const& p : parts )
  {
    out.middleRows( at, p.value().rows() ) = p.value();
    at += p.value().rows();
    rg = rg || p.requires_grad();
  }
  auto n = std::make_shared<node>();
  check_finite( out, "concat_rows" );
  n->value = std::move( out );
  n->seq = next_seq.fetch_add( 1u );
  if ( rg )
  {
    n->requires_grad = true;
    for ( auto const& p : parts )
    {
      n->parents.push_back( p.handle() );
    }
    n->backprop = []( node& self ) {
      Eigen::Index at = 0;
      for ( auto& p : self.parents )
      {
        auto const r = p->value.rows();
        if ( p->requires_grad )
        {
          p->accumulate( self.grad.middleRows( at, r ) );
        }
        at += r;
      }
    };
  }
  return tensor( std::move( n ) );
}

tensor column( tensor const& a, std::size_t k )
{
  if ( k >= a.cols() )
  {
    throw error( errc::shape_mismatch, "column " + std::to_string( k ) + " of " + shape_str( a.value() ) );
  }
  auto const c = static_cast<Eigen::Index>( k );
  return record( a.value().col( c ), "column", { &a }, [c]( node& self ) {
    matrix g = matrix::Zero( self.parents[0]->value.rows(), self.parents[0]->value.cols() );
    g.col( c ) = self.grad.col( 0 );
    self.parents[0]->accumulate( g );
  } );
}

tensor gather_rows( std::span<tensor const> sources, std::span<row_ref const> rows )
{
  if ( sources.empty() )
  {
    throw error( errc::shape_mismatch, "gather_rows without sources" );
  }
  auto const cols = sources[0].value().cols();
  matrix out( static_cast<Eigen::Index>( rows.size() ), cols );
  bool rg = false;
  for ( auto const& s : sources )
  {
    require( s.value().cols() == cols, "gather_rows", sources[0].value(), s.value() );
    rg = rg || s.requires_grad();
  }
  for ( std::size_t k = 0; k < rows.size(); ++k )
  {
    auto const& r = rows[k];
    if ( r.source >= sources.size() || r.row >= sources[r.source].rows() )
    {
      throw error( errc::shape_mismatch, "gather_rows index out of range" );
    }
    out.row( static_cast<Eigen::Index>( k ) ) = sources[r.source].value().row( r.row );
  }
  auto n = std::make_shared<node>();
  n->value = std::move( out );
  n->seq = next_seq.fetch_add( 1u );
  if ( rg )
  {
    n->requires_grad = true;
    for ( auto const& s : sources )
    {
      n->parents.push_back( s.handle() );
    }
    n->backprop = [index = std::vector<row_ref>( rows.begin(), rows.end() )]( node& self ) {
      for ( auto& p : self.parents )
      {
        if ( p->requires_grad && p->grad.size() == 0 )
        {
          p->grad = matrix::Zero( p->value.rows(), p->value.cols() );
        }
      }
      for ( std::size_t k = 0; k < index.size(); ++k )
      {
        auto& p = *self.parents[index[k].source];
        if ( p.requires_grad )
        {
          p.grad.row( index[k].row ) += self.grad.row( static_cast<Eigen::Index>( k ) );
        }
      }
    };
  }
  return tensor( std::move( n ) );
}

tensor row_softmax( tensor const& a )
{
  matrix out = a.value();
  for ( Eigen::Index k = 0; k < out.rows(); ++k )
  {
    auto row = out.row( k );
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
  return record( std::move( out ), "row_softmax", { &a }, []( node& self ) {
    auto const& y = self.value;
    matrix g = y.cwiseProduct( self.grad );
    matrix const dots = g.rowwise().sum();
    for ( Eigen::Index k = 0; k < g.rows(); ++k )
    {
      g.row( k ) -= dots( k, 0 ) * y.row( k );
    }
    self.parents[0]->accumulate( g );
  } );
}

tensor relu( tensor const& a )
{
  return record( a.value().cwiseMax( 0.0 ), "relu", { &a }, []( node& self ) {
    auto const& x = self.parents[0]->value;
    self.parents[0]->accumulate( ( x.array() > 0.0 ).select( self.grad, 0.0 ) );
  } );
}

tensor sigmoid( tensor const& a )
{
  matrix out = a.value().unaryExpr( []( double x ) {
    if ( x >= 0.0 )
    {
      return 1.0 / ( 1.0 + std::exp( -x ) );
    }
    auto const e = std::exp( x );
    return e / ( 1.0 + e );
  } );
  return record( std::move( out ), "sigmoid", { &a }, []( node& self ) {
    auto const& y = self.value;
    self.parents[0]->accumulate( self.grad.cwiseProduct( y.cwiseProduct( ( 1.0 - y.array() ).matrix() ) ) );
  } );
}

tensor abs( tensor const& a )
{
  return record( a.value().cwiseAbs(), "abs", { &a }, []( node& self ) {
    auto const& x = self.parents[0]->value;
    matrix const sign = x.unaryExpr( []( double v ) { return v > 0.0 ? 1.0 : ( v < 0.0 ? -1.0 : 0.0 ); } );
    self.parents[0]->accumulate( self.grad.cwiseProduct( sign ) );
  } );
}

tensor sum( tensor const& a )
{
  matrix out( 1, 1 );
  out( 0, 0 ) = a.value().sum();
  return record( std::move( out ), "sum", { &a }, []( node& self ) {
    auto const& x = self.parents[0]->value;
    self.parents[0]->accumulate( matrix::Constant( x.rows(), x.cols(), self.grad( 0, 0 ) ) );
  } );
}

tensor mean( tensor const& a )
{
  if ( a.value().size() == 0 )
  {
    throw error( errc::shape_mismatch, "mean of an empty tensor" );
  }
  auto const n = static_cast<double>( a.value().size() );
  matrix out( 1, 1 );
  out( 0, 0 ) = a.value().sum() / n;
  return record( std::move( out ), "mean", { &a }, [n]( node& self ) {
    auto const& x = self.parents[0]->value;
    self.parents[0]->accumulate( matrix::Constant( x.rows(), x.cols(), self.grad( 0, 0 ) / n ) );
  } );
}

tensor cosine_rows( tensor const& a, tensor const& b )
{
  require( a.rows() == b.rows() && a.cols() == b.cols(), "cosine_rows", a.value(), b.value() );
  auto const& x = a.value();
  auto const& y = b.value();
  matrix out( x.rows(), 1 );
  for ( Eigen::Index k = 0; k < x.rows(); ++k )
  {
    auto const nx = x.row( k ).norm(), ny = y.row( k ).norm();
    if ( nx == 0.0 || ny == 0.0 )
    {
      throw error( errc::zero_vector_cosine, "cosine similarity of a zero vector (row " + std::to_string( k ) + ")" );
    }
    out( k, 0 ) = x.row( k ).dot( y.row( k ) ) / ( nx * ny );
  }
  return record( std::move( out ), "cosine_rows", { &a, &b }, []( node& self ) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    auto const& x = pa.value;
    auto const& y = pb.value;
    matrix ga( x.rows(), x.cols() ), gb( y.rows(), y.cols() );
    for ( Eigen::Index k = 0; k < x.rows(); ++k )
    {
      auto const nx = x.row( k ).norm(), ny = y.row( k ).norm();
      auto const c = self.value( k, 0 );
      auto const g = self.grad( k, 0 );
      ga.row( k ) = g * ( y.row( k ) / ( nx * ny ) - c * x.row( k ) / ( nx * nx ) );
      gb.row( k ) = g * ( x.row( k ) / ( nx * ny ) - c * y.row( k ) / ( ny * ny ) );
    }
    if ( pa.requires_grad )
    {
      pa.accumulate( ga );
    }
    if ( pb.requires_grad )
    {
      pb.accumulate( gb );
    }
  } );
}

tensor bce_mean( tensor const& pred, matrix const& target )
{
  require( pred.rows() == static_cast<std::size_t>( target.rows() ) && pred.cols() == static_cast<std::size_t>( target.cols() ), "bce_mean", pred.value(),
           target );
  if ( target.size() == 0 )
  {
    throw error( errc::shape_mismatch, "bce_mean of an empty tensor" );
  }
  check_finite( target, "bce_mean target" );
  constexpr double log_floor = -100.0;
  auto const& p = pred.value();
  double total = 0.0;
  for ( Eigen::Index r = 0; r < p.rows(); ++r )
  {
    for ( Eigen::Index c = 0; c < p.cols(); ++c )
    {
      auto const t = target( r, c );
      auto const lp = std::max( std::log( p( r, c ) ), log_floor );
      auto const lq = std::max( std::log( 1.0 - p( r, c ) ), log_floor );
      total -= t * lp + ( 1.0 - t ) * lq;
    }
  }
  auto const n = static_cast<double>( p.size() );
  matrix out( 1, 1 );
  out( 0, 0 ) = total / n;
  return record( std::move( out ), "bce_mean", { &pred }, [target, n]( node& self ) {
    auto const& p = self.parents[0]->value;
    matrix g( p.rows(), p.cols() );
    for ( Eigen::Index r = 0; r < p.rows(); ++r )
    {
      for ( Eigen::Index c = 0; c < p.cols(); ++c )
      {
        auto const t = target( r, c );
        auto const x = p( r, c );
        double d = 0.0;
        if ( std::log( x ) > log_floor )
        {
          d -= t / x;
        }
        if ( std::log( 1.0 - x ) > log_floor )
        {
          d += ( 1.0 - t ) / ( 1.0 - x );
        }
        g( r, c ) = self.grad( 0, 0 ) * d / n;
      }
    }
    self.parents[0]->accumulate( g );
  } );
}

void backward( tensor const& loss )
{
  if ( !loss.defined() || loss.value().size() != 1 )
  {
    throw error( errc::non_scalar_loss, "backward needs a 1x1 loss" );
  }
  if ( !loss.requires_grad() )
  {
    return;
  }
  std::vector<node*> order;
  std::unordered_set<node*> seen;
  std::vector<node*> stack{ &loss.impl() };
  seen.insert( stack.back() );
  while ( !stack.empty() )
  {
    auto* n = stack.back();
    stack.pop_back();
    order.push_back( n );
    for ( auto const& p : n->parents )
    {
      if ( p->requires_grad && seen.insert( p.get() ).second )
      {
        stack.push_back( p.get() );
      }
    }
  }
  std::sort( order.begin(), order.end(), []( node* a, node* b ) { return a->seq > b->seq; } );
  loss.impl().accumulate( matrix::Ones( 1, 1 ) );
  for ( auto* n : order )
  {
    if ( !n->backprop )
    {
      check_finite( n->grad, "gradient" );
      continue;
    }
    if ( n->grad.size() != 0 )
    {
      n->backprop( *n );
      n->grad.resize( 0, 0 );
    }
  }
}

/* parameters and optimizer */

tensor const& parameter_store::add( std::string const& name, matrix value )
{
  if ( by_name_.count( name ) )
  {
    throw error( errc::bad_config, "duplicate parameter " + name );
  }
  names_.push_back( name );
  return by_name_.emplace( name, tensor::parameter( std::move( value ) ) ).first->second;
}

tensor const& parameter_store::operator[]( std::string const& name ) const
{
  auto it = by_name_.find( name );
  if ( it == by_name_.end() )
  {
    throw error( errc::bad_config, "unknown parameter " + name );
  }
  return it->second;
}

bool parameter_store::contains( std::string const& name ) const { return by_name_.count( name ) != 0; }

std::vector<tensor> parameter_store::tensors() const
{
  std::vector<tensor> out;
  for ( auto const& n : names_ )
  {
    out.push_back( by_name_.at( n ) );
  }
  return out;
}

std::size_t parameter_store::num_scalars() const
{
  std::size_t n = 0;
  for ( auto const& [_, t] : by_name_ )
  {
    n += static_cast<std::size_t>( t.value().size() );
  }
  return n;
}

void parameter_store::zero_grad()
{
  for ( auto& [_, t] : by_name_ )
  {
    tensor( t ).zero_grad();
  }
}

adam::adam( adam_config const& config, std::vector<tensor> params ) : config_( config ), params_( std::move( params ) )
{
  for ( auto const& p : params_ )
  {
    m_.push_back( matrix::Zero( p.value().rows(), p.value().cols() ) );
    v_.push_back( matrix::Zero( p.value().rows(), p.value().cols() ) );
  }
}

void adam::step()
{
  ++steps_;
  auto const t = static_cast<double>( steps_ );
  auto const c1 = 1.0 - std::pow( config_.beta1, t );
  auto const c2 = 1.0 - std::pow( config_.beta2, t );
  for ( std::size_t k = 0; k < params_.size(); ++k )
  {
    auto& theta = params_[k].mutable_value();
    matrix const g = params_[k].grad();
    theta -= config_.lr * config_.weight_decay * theta;
    m_[k] = config_.beta1 * m_[k] + ( 1.0 - config_.beta1 ) * g;
    v_[k] = config_.beta2 * v_[k] + ( 1.0 - config_.beta2 ) * g.cwiseProduct( g );
    theta.array() -= config_.lr * ( m_[k].array() / c1 ) / ( ( v_[k].array() / c2 ).sqrt() + config_.eps );
  }
}

void adam::zero_grad()
{
  for ( auto& p : params_ )
  {
    p.zero_grad();
  }
}

void adam::set_state( std::uint64_t steps, std::vector<matrix> m, std::vector<matrix> v )
{
  if ( m.size() != params_.size() || v.size() != params_.size() )
  {
    throw error( errc::shape_mismatch, "optimizer state has the wrong number of buffers" );
  }
  for ( std::size_t k = 0; k < params_.size(); ++k )
  {
    auto const& p = params_[k].value();
    if ( m[k].rows() != p.rows() || m[k].cols() != p.cols() || v[k].rows() != p.rows() || v[k].cols() != p.cols() )
    {
      throw error( errc::shape_mismatch, "optimizer buffer " + std::to_string( k ) + " is " + shape_str( m[k] ) + ", parameter is " + shape_str( p ) );
    }
  }
  steps_ = steps;
  m_ = std::move( m );
  v_ = std::move( v );
}

/* checkpoints */

namespace
{

using json = nlohmann::json;
constexpr int checkpoint_version = 1;

json matrix_to_json( matrix const& m )
{
  return json{ { "rows", m.rows() }, { "cols", m.cols() }, { "data", std::vector<double>( m.data(), m.data() + m.size() ) } };
}

matrix matrix_from_json( json const& j )
{
  auto const rows = j.at( "rows" ).get<Eigen::Index>();
  auto const cols = j.at( "cols" ).get<Eigen::Index>();
  auto const data = j.at( "data" ).get<std::vector<double>>();
  if ( rows < 0 || cols < 0 || static_cast<std::size_t>( rows * cols ) != data.size() )
  {
    throw error( errc::shape_mismatch, "checkpoint matrix data does not match its shape" );
  }
  matrix m( rows, cols );
  std::copy( data.begin(), data.end(), m.data() );
  return m;
}

} // namespace

checkpoint make_checkpoint( parameter_store const& store, adam const* opt, std::map<std::string, std::string> meta )
{
  checkpoint ck;
  for ( auto const& n : store.names() )
  {
    ck.params.emplace_back( n, store[n].value() );
  }
  if ( opt )
  {
    ck.has_optimizer = true;
    ck.optimizer = opt->config();
    ck.steps = opt->step_count();
    ck.m = opt->first_moments();
    ck.v = opt->second_moments();
  }
  ck.meta = std::move( meta );
  return ck;
}

void restore_checkpoint( checkpoint const& ck, parameter_store& store, adam* opt )
{
  if ( ck.params.size() != store.names().size() )
  {
    throw error( errc::shape_mismatch, "checkpoint has " + std::to_string( ck.params.size() ) + " parameters, model has " + std::to_string( store.names().size() ) );
  }
  for ( auto const& [name, value] : ck.params )
  {
    auto t = store[name];
    if ( t.value().rows() != value.rows() || t.value().cols() != value.cols() )
    {
      throw error( errc::shape_mismatch, "parameter " + name + " is " + shape_str( t.value() ) + ", checkpoint has " + shape_str( value ) );
    }
    t.mutable_value() = value;
  }
  if ( opt && ck.has_optimizer )
  {
    opt->config() = ck.optimizer;
    opt->set_state( ck.steps, ck.m, ck.v );
  }
}

std::string serialize_checkpoint( checkpoint const& ck )
{
  json j;
  j["gatekit_checkpoint"] = checkpoint_version;
  json params = json::array();
  for ( auto const& [name, value] : ck.params )
  {
    auto e = matrix_to_json( value );
    e["name"] = name;
    params.push_back( std::move( e ) );
  }
  j["params"] = std::move( params );
  if ( ck.has_optimizer )
  {
    json o;
    o["lr"] = ck.optimizer.lr;
    o["beta1"] = ck.optimizer.beta1;
    o["beta2"] = ck.optimizer.beta2;
    o["eps"] = ck.optimizer.eps;
    o["weight_decay"] = ck.optimizer.weight_decay;
    o["steps"] = ck.steps;
    o["m"] = json::array();
    o["v"] = json::array();
    for ( auto const& m : ck.m )
    {
      o["m"].push_back( matrix_to_json( m ) );
    }
    for ( auto const& v : ck.v )
    {
      o["v"].push_back( matrix_to_json( v ) );
    }
    j["optimizer"] = std::move( o );
  }
  j["meta"] = ck.meta;
  return j.dump() + "\n";
}

checkpoint parse_checkpoint( std::string const& text )
{
  auto const j = json::parse( text, nullptr, false );
  if ( j.is_discarded() || !j.is_object() )
  {
    throw error( errc::io_failure, "checkpoint is not valid JSON" );
  }
  if ( !j.contains( "gatekit_checkpoint" ) || j["gatekit_checkpoint"] != checkpoint_version )
  {
    throw error( errc::version_mismatch, "unsupported checkpoint version" );
  }
  try
  {
    checkpoint ck;
    for ( auto const& e : j.at( "params" ) )
    {
      ck.params.emplace_back( e.at( "name" ).get<std::string>(), matrix_from_json( e ) );
    }
    if ( j.contains( "optimizer" ) )
    {
      auto const& o = j["optimizer"];
      ck.has_optimizer = true;
      ck.optimizer.lr = o.at( "lr" ).get<double>();
      ck.optimizer.beta1 = o.at( "beta1" ).get<double>();
      ck.optimizer.beta2 = o.at( "beta2" ).get<double>();
      ck.optimizer.eps = o.at( "eps" ).get<double>();
      ck.optimizer.weight_decay = o.at( "weight_decay" ).get<double>();
      ck.steps = o.at( "steps" ).get<std::uint64_t>();
      for ( auto const& m : o.at( "m" ) )
      {
        ck.m.push_back( matrix_from_json( m ) );
      }
      for ( auto const& v : o.at( "v" ) )
      {
        ck.v.push_back( matrix_from_json( v ) );
      }
    }
    if ( j.contains( "meta" ) )
    {
      ck.meta = j["meta"].get<std::map<std::string, std::string>>();
    }
    return ck;
  }
  catch ( json::exception const& e )
  {
    throw error( errc::io_failure, std::string( "malformed checkpoint: " ) + e.what() );
  }
}

void write_checkpoint( checkpoint const& ck, std::string const& path )
{
  std::ofstream out( path, std::ios::binary );
  if ( !out )
  {
    throw error( errc::io_failure, "cannot write " + path );
  }
  out << serialize_checkpoint( ck );
  if ( !out )
  {
    throw error( errc::io_failure, "write failed for " + path );
  }
}

checkpoint read_checkpoint( std::string const& path )
{
  std::ifstream in( path, std::ios::binary );
  if ( !in )
  {
    throw error( errc::io_failure, "cannot open " + path );
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint( ss.str() );
}

} // namespace gatekit::grad
