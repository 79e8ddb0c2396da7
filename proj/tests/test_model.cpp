#include "gatekit/error.hpp"
#include "gatekit/model.hpp"
#include "gatekit/random.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gatekit;
using grad::matrix;
using grad::tensor;

namespace
{

model_config small_config( std::uint64_t seed = 1, std::size_t dim = 8 )
{
  model_config c;
  c.dim = dim;
  c.hidden = 5;
  c.seed = seed;
  return c;
}

/* straight-line attention: softmax over message logits, weighted sum of projected values */
matrix attention_oracle( attention_weights const& w, matrix const& messages )
{
  matrix const q = w.seed.value() * w.wq.value();
  auto const d = static_cast<double>( w.wq.value().cols() );
  std::vector<double> logits;
  for ( Eigen::Index j = 0; j < messages.rows(); ++j )
  {
    matrix const k = messages.row( j ) * w.wk.value();
    logits.push_back( q.row( 0 ).dot( k.row( 0 ) ) / std::sqrt( d ) );
  }
  double mx = -1e300;
  for ( auto l : logits )
  {
    mx = std::max( mx, l );
  }
  double z = 0.0;
  for ( auto& l : logits )
  {
    l = std::exp( l - mx );
    z += l;
  }
  matrix out = matrix::Zero( 1, w.wv.value().cols() );
  for ( Eigen::Index j = 0; j < messages.rows(); ++j )
  {
    out += ( logits[static_cast<std::size_t>( j )] / z ) * ( messages.row( j ) * w.wv.value() );
  }
  return out;
}

matrix concat( matrix const& a, matrix const& b )
{
  matrix out( a.rows(), a.cols() + b.cols() );
  out << a, b;
  return out;
}

double max_abs_diff( matrix const& a, matrix const& b ) { return ( a - b ).cwiseAbs().maxCoeff(); }

bool bit_equal( matrix const& a, matrix const& b )
{
  return a.rows() == b.rows() && a.cols() == b.cols() && std::equal( a.data(), a.data() + a.size(), b.data() );
}

/* node-by-node recomputation of the embedding recurrence */
std::pair<matrix, matrix> forward_oracle( model const& m, aig const& g, matrix const& pi_hs )
{
  auto const d = static_cast<Eigen::Index>( m.config().dim );
  matrix hs( g.size(), d ), hf( g.size(), d );
  for ( node_index n = 0; n < g.size(); ++n )
  {
    if ( g.is_pi( n ) )
    {
      hs.row( n ) = pi_hs.row( g.pi_position( n ) );
      hf.row( n ) = m.pi_functional().value().row( 0 );
      continue;
    }
    auto const fi = g.fanins( n );
    matrix ms( static_cast<Eigen::Index>( fi.size() ), d ), mf( static_cast<Eigen::Index>( fi.size() ), 2 * d );
    for ( std::size_t k = 0; k < fi.size(); ++k )
    {
      ms.row( static_cast<Eigen::Index>( k ) ) = hs.row( fi[k] );
      mf.row( static_cast<Eigen::Index>( k ) ) << hs.row( fi[k] ), hf.row( fi[k] );
    }
    hs.row( n ) = attention_oracle( m.weights( g.kind( n ), stream::structural ), ms );
    hf.row( n ) = attention_oracle( m.weights( g.kind( n ), stream::functional ), mf );
  }
  return { hs, hf };
}

double mlp_oracle( mlp_weights const& w, matrix const& x )
{
  matrix h = x * w.w1.value() + w.b1.value();
  h = h.cwiseMax( 0.0 );
  auto const z = ( h * w.w2.value() + w.b2.value() )( 0, 0 );
  return 1.0 / ( 1.0 + std::exp( -z ) );
}

/* the reconvergence example: 7 = AND(AND(1,2), AND(1,3)) reconverges on PI 1; 7' = AND(AND(1,2), AND(3,4)) does not */
struct reconvergence_fixture
{
  aig g;
  node_index merge, merge_prime;
};

reconvergence_fixture make_reconvergence()
{
  aig_builder b;
  auto const p1 = b.add_pi(), p2 = b.add_pi(), p3 = b.add_pi(), p4 = b.add_pi();
  auto const n5 = b.add_and( p1, p2 );
  auto const n6 = b.add_and( p1, p3 );
  auto const n7 = b.add_and( n5, n6 );
  auto const n5p = b.add_and( p1, p2 );
  auto const n6p = b.add_and( p3, p4 );
  auto const n7p = b.add_and( n5p, n6p );
  b.add_po( n7 );
  b.add_po( n7p );
  return { std::move( b ).build(), n7, n7p };
}

} // namespace

TEST( PiEncoding, OrthonormalRows )
{
  for ( std::size_t n : { 1u, 4u, 17u, 64u } )
  {
    for ( std::uint64_t seed = 0; seed < 5; ++seed )
    {
      auto const enc = init_pi_embeddings( n, 64, seed );
      EXPECT_FALSE( enc.quasi_orthogonal );
      matrix const gram = enc.hs * enc.hs.transpose();
      EXPECT_LT( max_abs_diff( gram, matrix::Identity( n, n ) ), 1e-6 );
    }
  }
  auto const a = init_pi_embeddings( 4, 64, 9 );
  auto const b = init_pi_embeddings( 4, 64, 9 );
  EXPECT_TRUE( bit_equal( a.hs, b.hs ) );
}

TEST( PiEncoding, QuasiOrthogonalBeyondDim )
{
  std::size_t good = 0;
  for ( std::uint64_t seed = 0; seed < 100; ++seed )
  {
    auto const enc = init_pi_embeddings( 100, 64, seed );
    ASSERT_TRUE( enc.quasi_orthogonal );
    matrix const gram = enc.hs * enc.hs.transpose();
    double worst = 0.0;
    for ( Eigen::Index i = 0; i < 100; ++i )
    {
      EXPECT_NEAR( gram( i, i ), 1.0, 1e-12 );
      for ( Eigen::Index j = i + 1; j < 100; ++j )
      {
        worst = std::max( worst, std::abs( gram( i, j ) ) );
      }
    }
    good += worst <= 0.5;
  }
  // each pairwise dot has variance 1/64, so |dot| > 0.5 is a 4-sigma event; over 4950 pairs
  // the chance of no exceedance is roughly exp(-4950 * 6.3e-5) ~ 0.73 (89 of 100 observed)
  EXPECT_GE( good, 75u );
}

TEST( PiEncoding, DisabledRepeatsOneRow )
{
  auto c = small_config();
  c.pie_enabled = false;
  auto const enc = pi_structural( c, 5, 3 );
  for ( Eigen::Index r = 1; r < 5; ++r )
  {
    EXPECT_TRUE( bit_equal( enc.hs.row( r ), enc.hs.row( 0 ) ) );
  }
  EXPECT_NEAR( enc.hs.row( 0 ).norm(), 1.0, 1e-12 );
}

TEST( Attention, Examples )
{
  model const m( small_config( 4 ) );
  auto const w = m.weights( gate_kind::and_gate, stream::structural );
  auto rng = make_rng( 5, 0 );
  matrix msg( 1, 8 ), two( 2, 8 ), dup( 2, 8 );
  for ( Eigen::Index k = 0; k < 8; ++k )
  {
    msg( 0, k ) = standard_normal( rng );
    two( 0, k ) = standard_normal( rng );
    two( 1, k ) = standard_normal( rng );
  }
  dup << msg, msg;

  matrix const single = msg * w.wv.value();
  EXPECT_TRUE( bit_equal( attention_aggregate( w, tensor::constant( msg ) ).value(), single ) );
  EXPECT_LT( max_abs_diff( attention_aggregate( w, tensor::constant( dup ) ).value(), single ), 1e-15 );
  EXPECT_LT( max_abs_diff( attention_aggregate( w, tensor::constant( two ) ).value(), attention_oracle( w, two ) ), 1e-13 );

  auto const wf = m.weights( gate_kind::not_gate, stream::functional );
  EXPECT_THROW( attention_aggregate( wf, tensor::constant( two ) ), error );
  try
  {
    attention_aggregate( w, tensor::constant( matrix( 0, 8 ) ) );
    FAIL();
  }
  catch ( error const& e )
  {
    EXPECT_EQ( e.code(), errc::empty_message_list );
  }
}

TEST( Forward, SingleNot )
{
  aig_builder b;
  auto const x = b.add_pi();
  auto const n = b.add_not( x );
  b.add_po( n );
  auto const g = std::move( b ).build();
  model const m( small_config( 6 ) );
  auto const st = forward( m, g, 0 );
  auto const enc = pi_structural( m.config(), 1, 0 );
  matrix const expect = concat( enc.hs, m.pi_functional().value() ) * m.weights( gate_kind::not_gate, stream::functional ).wv.value();
  EXPECT_TRUE( bit_equal( st.hf( 0 ).row( n ), expect ) );
  EXPECT_TRUE( bit_equal( st.hs( 0 ).row( x ), enc.hs ) );
  EXPECT_TRUE( bit_equal( st.hf( 0 ).row( x ), m.pi_functional().value() ) );
}

TEST( Forward, MatchesNodeByNodeOracle )
{
  // 6-gate diamond: two paths from x1/x2 reconverge, plus a negated tap
  aig_builder b;
  auto const x1 = b.add_pi(), x2 = b.add_pi(), x3 = b.add_pi();
  auto const a = b.add_and( x1, x2 );
  auto const c = b.add_and( x2, x3 );
  auto const na = b.add_not( a );
  auto const l = b.add_and( na, x3 );
  auto const r = b.add_and( c, x1 );
  auto const top = b.add_and( l, r );
  b.add_po( top );
  auto const g = std::move( b ).build();
  ASSERT_EQ( g.num_gates(), 6u );

  for ( std::uint64_t seed = 0; seed < 3; ++seed )
  {
    model const m( small_config( seed ) );
    auto const st = forward( m, g, seed );
    auto const [hs, hf] = forward_oracle( m, g, pi_structural( m.config(), 3, seed ).hs );
    EXPECT_LT( max_abs_diff( st.hs( 0 ), hs ), 1e-13 );
    EXPECT_LT( max_abs_diff( st.hf( 0 ), hf ), 1e-13 );
    EXPECT_EQ( st.aggregations, 2u * g.num_gates() );
  }
}

TEST( Forward, SameLevelOrderIndependent )
{
  // same circuit, the two level-1 gates created in opposite order
  aig_builder b1, b2;
  auto const p = b1.add_pi(), q = b1.add_pi(), r = b1.add_pi();
  auto const g1 = b1.add_and( p, q );
  auto const g2 = b1.add_and( q, r );
  auto const n1 = b1.add_not( g2 );
  auto const t1 = b1.add_and( g1, n1 );
  b1.add_po( t1 );
  auto const p2 = b2.add_pi(), q2 = b2.add_pi(), r2 = b2.add_pi();
  auto const h2 = b2.add_and( q2, r2 );
  auto const m2 = b2.add_not( h2 );
  auto const h1 = b2.add_and( p2, q2 );
  auto const t2 = b2.add_and( h1, m2 );
  b2.add_po( t2 );
  auto const ga = std::move( b1 ).build();
  auto const gb = std::move( b2 ).build();

  model const m( small_config( 7 ) );
  auto const sa = forward( m, ga, 3 );
  auto const sb = forward( m, gb, 3 );
  std::vector<std::pair<node_index, node_index>> const map{ { p, p2 }, { q, q2 }, { r, r2 }, { g1, h1 }, { g2, h2 }, { n1, m2 }, { t1, t2 } };
  for ( auto [x, y] : map )
  {
    EXPECT_TRUE( bit_equal( sa.hs( 0 ).row( x ), sb.hs( 0 ).row( y ) ) ) << x;
    EXPECT_TRUE( bit_equal( sa.hf( 0 ).row( x ), sb.hf( 0 ).row( y ) ) ) << x;
  }
}

TEST( Forward, BatchMatchesSingle )
{
  auto const fx = make_reconvergence();
  aig_builder b;
  auto const x = b.add_pi();
  b.add_po( b.add_not( x ) );
  auto const small = std::move( b ).build();
  model const m( small_config( 8 ) );
  std::vector<aig const*> const graphs{ &fx.g, &small, &fx.g };
  std::vector<matrix> const pis{ pi_structural( m.config(), 4, 1 ).hs, pi_structural( m.config(), 1, 2 ).hs, pi_structural( m.config(), 4, 3 ).hs };
  auto const st = forward( m, graphs, pis );
  EXPECT_LT( max_abs_diff( st.hf( 0 ), forward( m, fx.g, 1 ).hf( 0 ) ), 1e-13 );
  EXPECT_LT( max_abs_diff( st.hf( 1 ), forward( m, small, 2 ).hf( 0 ) ), 1e-13 );
  EXPECT_LT( max_abs_diff( st.hs( 2 ), forward( m, fx.g, 3 ).hs( 0 ) ), 1e-13 );
  EXPECT_EQ( st.aggregations, 2u * ( 2u * fx.g.num_gates() + 1u ) );

  std::vector<matrix> const wrong{ pis[0], pis[0], pis[2] };
  try
  {
    forward( m, graphs, wrong );
    FAIL();
  }
  catch ( error const& e )
  {
    EXPECT_EQ( e.code(), errc::uninitialized_pis );
  }
}

TEST( Forward, StructuralStreamIgnoresFunctionalInputs )
{
  auto const fx = make_reconvergence();
  model m( small_config( 9 ) );
  auto const before = forward( m, fx.g, 4 ).hs( 0 );
  auto rng = make_rng( 10, 0 );
  for ( auto const& name : m.params().names() )
  {
    if ( name == "pi.hf" || name.find( ".f." ) != std::string::npos )
    {
      auto t = m.params()[name];
      for ( Eigen::Index k = 0; k < t.value().size(); ++k )
      {
        t.mutable_value().data()[k] = standard_normal( rng );
      }
    }
  }
  EXPECT_TRUE( bit_equal( forward( m, fx.g, 4 ).hs( 0 ), before ) );
}

TEST( Forward, PiPermutationEquivariance )
{
  // same circuit with the PI declaration order reversed; PI rows follow their PIs
  aig_builder b1, b2;
  auto const a = b1.add_pi(), bb = b1.add_pi(), c = b1.add_pi();
  auto const u = b1.add_and( a, bb );
  auto const v = b1.add_and( b1.add_not( bb ), c );
  auto const w = b1.add_and( u, v );
  b1.add_po( w );
  auto const c2 = b2.add_pi(), b22 = b2.add_pi(), a2 = b2.add_pi();
  auto const u2 = b2.add_and( a2, b22 );
  auto const v2 = b2.add_and( b2.add_not( b22 ), c2 );
  auto const w2 = b2.add_and( u2, v2 );
  b2.add_po( w2 );
  auto const g1 = std::move( b1 ).build();
  auto const g2 = std::move( b2 ).build();

  model const m( small_config( 11 ) );
  auto const enc = init_pi_embeddings( 3, 8, 5 ).hs;
  matrix rev( 3, 8 );
  rev << enc.row( 2 ), enc.row( 1 ), enc.row( 0 );
  std::vector<aig const*> const one{ &g1 }, two{ &g2 };
  std::vector<matrix> const e1{ enc }, e2{ rev };
  auto const s1 = forward( m, one, e1 );
  auto const s2 = forward( m, two, e2 );
  for ( auto [x, y] : std::vector<std::pair<node_index, node_index>>{ { a, a2 }, { u, u2 }, { v, v2 }, { w, w2 } } )
  {
    EXPECT_LT( max_abs_diff( s1.hs( 0 ).row( x ), s2.hs( 0 ).row( y ) ), 1e-14 );
    EXPECT_LT( max_abs_diff( s1.hf( 0 ).row( x ), s2.hf( 0 ).row( y ) ), 1e-14 );
  }
}

TEST( Forward, ReconvergenceNeedsPiEncoding )
{
  auto const fx = make_reconvergence();
  for ( std::uint64_t seed = 0; seed < 5; ++seed )
  {
    auto on = small_config( seed, 64 );
    auto off = on;
    off.pie_enabled = false;
    auto const s_on = forward( model( on ), fx.g, seed ).hs( 0 );
    auto const s_off = forward( model( off ), fx.g, seed ).hs( 0 );
    EXPECT_GT( ( s_on.row( fx.merge ) - s_on.row( fx.merge_prime ) ).norm(), 1e-6 );
    EXPECT_TRUE( bit_equal( s_off.row( fx.merge ), s_off.row( fx.merge_prime ) ) );
  }
}

TEST( Heads, Examples )
{
  auto const fx = make_reconvergence();
  model m( small_config( 12 ) );
  auto const st = forward( m, fx.g, 0 );
  auto const self = predict_heads( m, st, 0, fx.merge, fx.merge );
  EXPECT_NEAR( self.sim, 1.0, 1e-15 );

  for ( Eigen::Index r = 0; r < 20; ++r )
  {
    auto const i = static_cast<node_index>( r % fx.g.size() ), j = static_cast<node_index>( ( 3 * r + 1 ) % fx.g.size() );
    auto const h = predict_heads( m, st, 0, i, j );
    auto const hf = st.hf( 0 ), hs = st.hs( 0 );
    EXPECT_NEAR( h.prob, mlp_oracle( m.prob_head(), hf.row( i ) ), 1e-12 );
    EXPECT_NEAR( h.rc, mlp_oracle( m.rc_head(), concat( hs.row( i ), hs.row( j ) ) ), 1e-12 );
    EXPECT_NEAR( h.sim, hf.row( i ).dot( hf.row( j ) ) / ( hf.row( i ).norm() * hf.row( j ).norm() ), 1e-12 );
  }

  for ( auto const* name : { "prob.w1", "prob.b1", "prob.w2", "prob.b2" } )
  {
    auto t = m.params()[name];
    t.mutable_value().setZero();
  }
  EXPECT_EQ( predict_heads( m, st, 0, 4, 5 ).prob, 0.5 );
}

TEST( Model, CheckpointRoundTrip )
{
  auto const fx = make_reconvergence();
  auto cfg = small_config( 13 );
  cfg.pie_enabled = false;
  model const m( cfg );
  auto const back = model_from_checkpoint( grad::parse_checkpoint( grad::serialize_checkpoint( model_checkpoint( m ) ) ) );
  EXPECT_EQ( back.config().dim, cfg.dim );
  EXPECT_EQ( back.config().hidden, cfg.hidden );
  EXPECT_FALSE( back.config().pie_enabled );
  EXPECT_TRUE( bit_equal( forward( back, fx.g, 2 ).hf( 0 ), forward( m, fx.g, 2 ).hf( 0 ) ) );
}
