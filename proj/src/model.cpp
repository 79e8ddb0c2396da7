#include "gatekit/model.hpp"

#include "gatekit/error.hpp"
#include "gatekit/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace gatekit
{

using grad::matrix;
using grad::tensor;

namespace
{

char const* kind_name( gate_kind k )
{
  switch ( k )
  {
  case gate_kind::and_gate: return "and";
  case gate_kind::not_gate: return "not";
  default: throw error( errc::bad_config, "PIs have no aggregator" );
  }
}

char const* stream_name( stream s ) { return s == stream::structural ? "s" : "f"; }

matrix glorot( rng_engine& rng, std::size_t in, std::size_t out )
{
  auto const a = std::sqrt( 6.0 / static_cast<double>( in + out ) );
  matrix m( in, out );
  for ( Eigen::Index k = 0; k < m.size(); ++k )
  {
    m.data()[k] = uniform( rng, -a, a );
  }
  return m;
}

matrix normal_row( rng_engine& rng, std::size_t d, double s )
{
  matrix m( 1, d );
  for ( Eigen::Index k = 0; k < m.size(); ++k )
  {
    m.data()[k] = s * standard_normal( rng );
  }
  return m;
}

tensor mlp( mlp_weights const& w, tensor const& x )
{
  auto const h = grad::relu( grad::add_row( grad::matmul( x, w.w1 ), w.b1 ) );
  return grad::sigmoid( grad::add_row( grad::matmul( h, w.w2 ), w.b2 ) );
}

} // namespace

model::model( model_config const& config ) : config_( config )
{
  if ( config.dim == 0u || config.hidden == 0u )
  {
    throw error( errc::bad_config, "dim and hidden must be positive" );
  }
  auto rng = make_rng( config.seed, 0x6d6f64656cu );
  auto const d = config.dim;
  for ( auto k : { gate_kind::and_gate, gate_kind::not_gate } )
  {
    for ( auto s : { stream::structural, stream::functional } )
    {
      auto const prefix = std::string( kind_name( k ) ) + "." + stream_name( s ) + ".";
      auto const in = s == stream::structural ? d : 2u * d;
      params_.add( prefix + "seed", normal_row( rng, d, 1.0 ) );
      params_.add( prefix + "wq", glorot( rng, d, d ) );
      params_.add( prefix + "wk", glorot( rng, in, d ) );
      params_.add( prefix + "wv", glorot( rng, in, d ) );
    }
  }
  params_.add( "pi.hf", normal_row( rng, d, 1.0 / std::sqrt( static_cast<double>( d ) ) ) );
  for ( auto const* head : { "prob", "rc" } )
  {
    auto const in = std::string( head ) == "prob" ? d : 2u * d;
    params_.add( std::string( head ) + ".w1", glorot( rng, in, config.hidden ) );
    params_.add( std::string( head ) + ".b1", matrix::Zero( 1, config.hidden ) );
    params_.add( std::string( head ) + ".w2", glorot( rng, config.hidden, 1u ) );
    params_.add( std::string( head ) + ".b2", matrix::Zero( 1, 1 ) );
  }
}

attention_weights model::weights( gate_kind kind, stream s ) const
{
  auto const prefix = std::string( kind_name( kind ) ) + "." + stream_name( s ) + ".";
  return { params_[prefix + "seed"], params_[prefix + "wq"], params_[prefix + "wk"], params_[prefix + "wv"] };
}

mlp_weights model::prob_head() const { return { params_["prob.w1"], params_["prob.b1"], params_["prob.w2"], params_["prob.b2"] }; }
mlp_weights model::rc_head() const { return { params_["rc.w1"], params_["rc.b1"], params_["rc.w2"], params_["rc.b2"] }; }

pi_encoding init_pi_embeddings( std::size_t num_pi, std::size_t d, std::uint64_t seed )
{
  auto rng = make_rng( seed, 0x70696521u );
  pi_encoding out;
  if ( num_pi <= d )
  {
    Eigen::MatrixXd g( d, d );
    for ( Eigen::Index k = 0; k < g.size(); ++k )
    {
      g.data()[k] = standard_normal( rng );
    }
    Eigen::MatrixXd const q = Eigen::HouseholderQR<Eigen::MatrixXd>( g ).householderQ();
    out.hs = q.topRows( static_cast<Eigen::Index>( num_pi ) );
    return out;
  }
  out.quasi_orthogonal = true;
  out.hs.resize( static_cast<Eigen::Index>( num_pi ), static_cast<Eigen::Index>( d ) );
  for ( Eigen::Index r = 0; r < out.hs.rows(); ++r )
  {
    for ( Eigen::Index c = 0; c < out.hs.cols(); ++c )
    {
      out.hs( r, c ) = standard_normal( rng );
    }
    out.hs.row( r ).normalize();
  }
  return out;
}

pi_encoding pi_structural( model_config const& config, std::size_t num_pi, std::uint64_t seed )
{
  if ( config.pie_enabled )
  {
    return init_pi_embeddings( num_pi, config.dim, seed );
  }
  auto const one = init_pi_embeddings( 1u, config.dim, seed );
  pi_encoding out;
  out.hs = one.hs.replicate( static_cast<Eigen::Index>( num_pi ), 1 );
  return out;
}

tensor attention_batch( attention_weights const& w, std::span<tensor const> slots )
{
  if ( slots.empty() )
  {
    throw error( errc::empty_message_list, "attention over zero messages" );
  }
  for ( auto const& s : slots )
  {
    if ( s.cols() != w.wk.rows() || s.rows() != slots[0].rows() )
    {
      throw error( errc::shape_mismatch, "message width " + std::to_string( s.cols() ) + " does not match the key projection" );
    }
  }
  auto const d = static_cast<double>( w.wq.cols() );
  auto const q = grad::matmul( w.seed, w.wq );                   // 1 x d
  auto const kq = grad::matmul( w.wk, grad::transpose( q ) );    // w x 1
  std::vector<tensor> logits;
  for ( auto const& s : slots )
  {
    logits.push_back( grad::scale( grad::matmul( s, kq ), 1.0 / std::sqrt( d ) ) );
  }
  auto all = logits[0];
  for ( std::size_t k = 1; k < logits.size(); ++k )
  {
    all = grad::concat_cols( all, logits[k] );
  }
  auto const alpha = grad::row_softmax( all );
  tensor out;
  for ( std::size_t k = 0; k < slots.size(); ++k )
  {
    auto const term = grad::mul_col( grad::matmul( slots[k], w.wv ), grad::column( alpha, k ) );
    out = out.defined() ? grad::add( out, term ) : term;
  }
  return out;
}

tensor attention_aggregate( attention_weights const& w, tensor const& messages )
{
  if ( messages.rows() == 0u )
  {
    throw error( errc::empty_message_list, "attention over zero messages" );
  }
  std::vector<tensor> slots;
  std::vector<tensor> src{ messages };
  for ( std::uint32_t k = 0; k < messages.rows(); ++k )
  {
    grad::row_ref const r{ 0u, k };
    slots.push_back( grad::gather_rows( src, std::span( &r, 1u ) ) );
  }
  return attention_batch( w, slots );
}

/* forward */

namespace
{

tensor rows_of( std::vector<tensor> const& levels, std::vector<std::vector<grad::row_ref>> const& where,
                std::span<std::pair<std::uint32_t, node_index> const> nodes )
{
  std::vector<grad::row_ref> refs;
  refs.reserve( nodes.size() );
  for ( auto [c, n] : nodes )
  {
    refs.push_back( where.at( c ).at( n ) );
  }
  return grad::gather_rows( levels, refs );
}

matrix all_rows( std::vector<tensor> const& levels, std::vector<grad::row_ref> const& where )
{
  matrix out( static_cast<Eigen::Index>( where.size() ), levels.at( 0 ).value().cols() );
  for ( std::size_t n = 0; n < where.size(); ++n )
  {
    out.row( static_cast<Eigen::Index>( n ) ) = levels[where[n].source].value().row( where[n].row );
  }
  return out;
}

} // namespace

tensor embedding_state::hs_rows( std::span<std::pair<std::uint32_t, node_index> const> nodes ) const { return rows_of( hs_levels, where, nodes ); }
tensor embedding_state::hf_rows( std::span<std::pair<std::uint32_t, node_index> const> nodes ) const { return rows_of( hf_levels, where, nodes ); }
matrix embedding_state::hs( std::size_t c ) const { return all_rows( hs_levels, where.at( c ) ); }
matrix embedding_state::hf( std::size_t c ) const { return all_rows( hf_levels, where.at( c ) ); }

embedding_state forward( model const& m, std::span<aig const* const> graphs, std::span<matrix const> pi_hs )
{
  auto const d = static_cast<Eigen::Index>( m.config().dim );
  if ( pi_hs.size() != graphs.size() )
  {
    throw error( errc::uninitialized_pis, "PI embeddings given for " + std::to_string( pi_hs.size() ) + " of " + std::to_string( graphs.size() ) + " circuits" );
  }
  embedding_state st;
  st.where.resize( graphs.size() );
  std::uint32_t depth = 0;
  for ( std::size_t c = 0; c < graphs.size(); ++c )
  {
    auto const& g = *graphs[c];
    if ( pi_hs[c].rows() != static_cast<Eigen::Index>( g.num_pis() ) || pi_hs[c].cols() != d )
    {
      throw error( errc::uninitialized_pis, "circuit " + std::to_string( c ) + " has " + std::to_string( g.num_pis() ) + " PIs but PI embeddings of shape " +
                                                std::to_string( pi_hs[c].rows() ) + "x" + std::to_string( pi_hs[c].cols() ) );
    }
    st.where[c].resize( g.size() );
    depth = std::max( depth, g.depth() );
  }

  /* level 0: PIs */
  std::size_t num_pi_rows = 0;
  for ( std::size_t c = 0; c < graphs.size(); ++c )
  {
    num_pi_rows += graphs[c]->num_pis();
  }
  matrix hs0( static_cast<Eigen::Index>( num_pi_rows ), d );
  std::uint32_t row = 0;
  for ( std::size_t c = 0; c < graphs.size(); ++c )
  {
    auto const pis = graphs[c]->pis();
    for ( std::size_t k = 0; k < pis.size(); ++k )
    {
      hs0.row( row ) = pi_hs[c].row( static_cast<Eigen::Index>( k ) );
      st.where[c][pis[k]] = { 0u, row++ };
    }
  }
  st.hs_levels.push_back( tensor::constant( std::move( hs0 ) ) );
  {
    std::vector<tensor> src{ m.pi_functional() };
    std::vector<grad::row_ref> const zeros( num_pi_rows, grad::row_ref{ 0u, 0u } );
    st.hf_levels.push_back( grad::gather_rows( src, zeros ) );
  }

  /* gates grouped by (level, kind), ordered by circuit then node id */
  std::vector<std::array<std::vector<std::pair<std::uint32_t, node_index>>, 2>> buckets( depth + 1u );
  for ( std::uint32_t c = 0; c < graphs.size(); ++c )
  {
    auto const& g = *graphs[c];
    for ( node_index n = 0; n < g.size(); ++n )
    {
      if ( g.is_pi( n ) )
      {
        continue;
      }
      buckets[g.level( n )][g.kind( n ) == gate_kind::and_gate ? 0 : 1].emplace_back( c, n );
    }
  }

  for ( std::uint32_t lvl = 1; lvl <= depth; ++lvl )
  {
    std::vector<tensor> hs_parts, hf_parts;
    std::uint32_t next_row = 0;
    for ( int kind = 0; kind < 2; ++kind )
    {
      auto const& gates = buckets[lvl][kind];
      if ( gates.empty() )
      {
        continue;
      }
      auto const gk = kind == 0 ? gate_kind::and_gate : gate_kind::not_gate;
      auto const arity = kind == 0 ? 2u : 1u;
      std::vector<tensor> s_slots, f_slots;
      for ( std::size_t k = 0; k < arity; ++k )
      {
        std::vector<grad::row_ref> refs;
        refs.reserve( gates.size() );
        for ( auto [c, n] : gates )
        {
          refs.push_back( st.where[c][graphs[c]->fanins( n )[k]] );
        }
        auto const hs_msg = grad::gather_rows( st.hs_levels, refs );
        s_slots.push_back( hs_msg );
        f_slots.push_back( grad::concat_cols( hs_msg, grad::gather_rows( st.hf_levels, refs ) ) );
      }
      hs_parts.push_back( attention_batch( m.weights( gk, stream::structural ), s_slots ) );
      hf_parts.push_back( attention_batch( m.weights( gk, stream::functional ), f_slots ) );
      st.aggregations += 2u * gates.size();
      for ( auto [c, n] : gates )
      {
        st.where[c][n] = { lvl, next_row++ };
      }
    }
    st.hs_levels.push_back( hs_parts.size() == 1u ? hs_parts[0] : grad::concat_rows( hs_parts ) );
    st.hf_levels.push_back( hf_parts.size() == 1u ? hf_parts[0] : grad::concat_rows( hf_parts ) );
  }
  return st;
}

embedding_state forward( model const& m, aig const& g, std::uint64_t pi_seed )
{
  auto enc = pi_structural( m.config(), g.num_pis(), pi_seed );
  std::vector<aig const*> const graphs{ &g };
  std::vector<matrix> const pis{ std::move( enc.hs ) };
  auto st = forward( m, graphs, pis );
  st.quasi_orthogonal_pis = enc.quasi_orthogonal;
  return st;
}

tensor predict_prob( model const& m, tensor const& hf ) { return mlp( m.prob_head(), hf ); }

tensor predict_rc( model const& m, tensor const& hs_i, tensor const& hs_j ) { return mlp( m.rc_head(), grad::concat_cols( hs_i, hs_j ) ); }

head_values predict_heads( model const& m, embedding_state const& state, std::uint32_t c, node_index i, node_index j )
{
  std::pair<std::uint32_t, node_index> const ni{ c, i }, nj{ c, j };
  auto const hf_i = state.hf_rows( std::span( &ni, 1u ) );
  auto const hf_j = state.hf_rows( std::span( &nj, 1u ) );
  auto const hs_i = state.hs_rows( std::span( &ni, 1u ) );
  auto const hs_j = state.hs_rows( std::span( &nj, 1u ) );
  return { predict_prob( m, hf_i ).item(), predict_rc( m, hs_i, hs_j ).item(), grad::cosine_rows( hf_i, hf_j ).item() };
}

grad::checkpoint model_checkpoint( model const& m, grad::adam const* opt )
{
  auto const& c = m.config();
  return grad::make_checkpoint( m.params(), opt,
                                { { "dim", std::to_string( c.dim ) },
                                  { "hidden", std::to_string( c.hidden ) },
                                  { "seed", std::to_string( c.seed ) },
                                  { "pie_enabled", c.pie_enabled ? "true" : "false" } } );
}

model model_from_checkpoint( grad::checkpoint const& ck )
{
  model_config c;
  try
  {
    c.dim = std::stoull( ck.meta.at( "dim" ) );
    c.hidden = std::stoull( ck.meta.at( "hidden" ) );
    c.seed = std::stoull( ck.meta.at( "seed" ) );
    c.pie_enabled = ck.meta.at( "pie_enabled" ) == "true";
  }
  catch ( std::exception const& )
  {
    throw error( errc::bad_config, "checkpoint lacks a model configuration" );
  }
  model m( c );
  grad::restore_checkpoint( ck, m.params() );
  return m;
}

} // namespace gatekit
