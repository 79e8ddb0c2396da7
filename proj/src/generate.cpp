#include "gatekit/generate.hpp"

#include "gatekit/random.hpp"

#include <algorithm>
#include <cstdint>
#include <vector>

namespace gatekit
{

aig random_aig( random_aig_config const& config )
{
  auto rng = make_rng( config.seed, 0x61696721u );
  aig_builder b;
  for ( std::size_t k = 0; k < std::max<std::size_t>( config.num_pis, 1u ); ++k )
  {
    b.add_pi();
  }
  auto const num_pis = b.size();
  std::vector<node_index> ands; // gates from random steps, targets of rewriting
  std::vector<bool> rewritten;

  /* functions over a fixed pattern set (exhaustive up to 10 PIs) so that constant and duplicate gates can be rejected */
  auto const exhaustive = num_pis <= 10u;
  auto const bits = exhaustive ? std::size_t{ 1 } << num_pis : std::size_t{ 256 };
  auto const words = ( bits + 63u ) / 64u;
  auto const tail = bits % 64u == 0u ? ~std::uint64_t{ 0 } : ( std::uint64_t{ 1 } << ( bits % 64u ) ) - 1u;
  std::vector<std::vector<std::uint64_t>> fn;
  for ( std::size_t k = 0; k < num_pis; ++k )
  {
    std::vector<std::uint64_t> w( words, 0u );
    for ( std::size_t p = 0; p < bits; ++p )
    {
      auto const v = exhaustive ? ( ( p >> k ) & 1u ) != 0u : ( rng() & 1u ) != 0u;
      w[p / 64u] |= std::uint64_t{ v } << ( p % 64u );
    }
    fn.push_back( std::move( w ) );
  }
  auto function_of = [&]( node_index n, bool complement ) {
    auto w = fn[n];
    if ( complement )
    {
      for ( auto& x : w )
      {
        x = ~x;
      }
      w.back() &= tail;
    }
    return w;
  };
  auto is_constant = [&]( std::vector<std::uint64_t> const& w ) {
    auto const zero = std::all_of( w.begin(), w.end(), []( auto x ) { return x == 0u; } );
    auto ones = w.back() == tail;
    for ( std::size_t k = 0; k + 1u < w.size(); ++k )
    {
      ones = ones && w[k] == ~std::uint64_t{ 0 };
    }
    return zero || ones;
  };
  /* keep fn in step with the builder */
  auto sync = [&]() {
    while ( fn.size() < b.size() )
    {
      auto const n = static_cast<node_index>( fn.size() );
      auto const fi = b.fanins( n );
      if ( b.kind( n ) == gate_kind::not_gate )
      {
        fn.push_back( function_of( fi[0], true ) );
      }
      else
      {
        auto w = fn[fi[0]];
        for ( std::size_t k = 0; k < w.size(); ++k )
        {
          w[k] &= fn[fi[1]][k];
        }
        fn.push_back( std::move( w ) );
      }
    }
  };

  auto signal = [&]( node_index n, bool complement ) {
    if ( !complement )
    {
      return n;
    }
    return b.kind( n ) == gate_kind::not_gate ? b.fanins( n )[0] : b.add_not( n );
  };
  auto coin = [&]( double p ) { return uniform01( rng ) < p; };
  /* half of the draws favour recent nodes so that depth grows */
  auto pick = [&]() -> node_index {
    auto const n = b.size();
    if ( n > num_pis + 4u && coin( 0.5 ) )
    {
      auto const window = std::min<std::size_t>( n, 10u );
      return static_cast<node_index>( n - 1u - uniform_index( rng, window ) );
    }
    return static_cast<node_index>( uniform_index( rng, n ) );
  };
  auto add_and = [&]( node_index x, node_index y ) {
    auto const g = b.add_and( x, y );
    sync();
    return g;
  };
  auto is_known = [&]( std::vector<std::uint64_t> const& w ) {
    auto const c = [&]() {
      auto v = w;
      for ( auto& x : v )
      {
        x = ~x;
      }
      v.back() &= tail;
      return v;
    }();
    return std::any_of( fn.begin(), fn.end(), [&]( auto const& f ) { return f == w || f == c; } );
  };

  std::size_t stalls = 0u;
  while ( b.size() - num_pis + 4u <= config.max_gates && stalls < 256u )
  {
    if ( !ands.empty() && coin( config.redundancy ) )
    {
      auto const k = uniform_index( rng, ands.size() );
      if ( rewritten[k] )
      {
        ++stalls;
        continue;
      }
      rewritten[k] = true;
      auto const g = ands[k];
      auto const a = b.fanins( g )[0];
      auto const c = b.fanins( g )[1];
      switch ( uniform_index( rng, 3u ) )
      {
      case 0u:
        add_and( c, a );
        break;
      case 1u:
        if ( b.kind( a ) == gate_kind::and_gate )
        {
          auto const x = b.fanins( a )[0];
          auto const y = b.fanins( a )[1];
          add_and( x, add_and( y, c ) );
        }
        else if ( b.kind( c ) == gate_kind::and_gate )
        {
          auto const x = b.fanins( c )[0];
          auto const y = b.fanins( c )[1];
          add_and( add_and( a, x ), y );
        }
        else
        {
          add_and( c, a );
        }
        break;
      default:
        add_and( g, coin( 0.5 ) ? a : c );
        break;
      }
      continue;
    }

    auto const x = pick();
    auto y = pick();
    for ( int attempt = 0; attempt < 4 && y == x; ++attempt )
    {
      y = pick();
    }
    if ( x == y )
    {
      ++stalls;
      continue;
    }
    auto const cx = coin( config.complement_prob );
    auto const cy = coin( config.complement_prob );
    auto candidate = function_of( x, cx );
    auto const other = function_of( y, cy );
    for ( std::size_t k = 0; k < candidate.size(); ++k )
    {
      candidate[k] &= other[k];
    }
    if ( is_constant( candidate ) || is_known( candidate ) )
    {
      ++stalls;
      continue;
    }
    auto const sx = signal( x, cx );
    auto const sy = signal( y, cy );
    sync();
    stalls = 0u;
    ands.push_back( add_and( sx, sy ) );
    rewritten.push_back( false );
  }

  std::vector<bool> has_fanout( b.size(), false );
  for ( node_index n = 0; n < b.size(); ++n )
  {
    for ( auto f : b.fanins( n ) )
    {
      has_fanout[f] = true;
    }
  }
  for ( node_index n = 0; n < b.size(); ++n )
  {
    if ( !has_fanout[n] )
    {
      b.add_po( n );
    }
  }
  return canonicalize( std::move( b ).build() );
}

duplicated_aig inject_duplicate_cones( aig const& g, std::size_t count, std::uint64_t seed )
{
  auto rng = make_rng( seed, 0x64757021u );
  aig_builder b;
  for ( node_index n = 0; n < g.size(); ++n )
  {
    auto const fi = g.fanins( n );
    switch ( g.kind( n ) )
    {
    case gate_kind::pi: b.add_pi(); break;
    case gate_kind::not_gate: b.add_not( fi[0] ); break;
    case gate_kind::and_gate: b.add_and( fi[0], fi[1] ); break;
    }
  }
  for ( auto p : g.pos() )
  {
    b.add_po( p );
  }

  std::vector<node_index> gates;
  for ( node_index n = 0; n < g.size(); ++n )
  {
    if ( g.kind( n ) == gate_kind::and_gate )
    {
      gates.push_back( n );
    }
  }
  shuffle( gates, rng );
  gates.resize( std::min( count, gates.size() ) );
  std::sort( gates.begin(), gates.end() );

  duplicated_aig out;
  out.reference_ands = g.num_ands();
  for ( auto root : gates )
  {
    std::vector<node_index> map( g.size() );
    for ( auto n : support( g, root ).gates )
    {
      auto const fi = g.fanins( n );
      switch ( g.kind( n ) )
      {
      case gate_kind::pi: map[n] = n; break;
      case gate_kind::not_gate: map[n] = b.add_not( map[fi[0]] ); break;
      case gate_kind::and_gate:
        map[n] = b.add_and( map[fi[1]], map[fi[0]] );
        ++out.injected_ands;
        break;
      }
    }
    b.add_po( map[root] );
    out.roots.emplace_back( root, map[root] );
  }
  out.graph = std::move( b ).build();
  return out;
}

} // namespace gatekit
