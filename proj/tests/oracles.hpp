// Brute-force reference implementations used only by the test suites.
// They deliberately avoid the library's bit-parallel and bitset paths.

#pragma once

#include "gatekit/aig.hpp"
#include "gatekit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <cstdint>
#include <functional>
#include <set>
#include <vector>

namespace gatekit::oracle
{

/* recursive single-pattern evaluation with memoization; pi_values indexed by PI position */
inline bool eval_node( aig const& g, node_index n, std::vector<bool> const& pi_values, std::vector<int>& memo )
{
  if ( memo[n] >= 0 )
  {
    return memo[n] == 1;
  }
  auto const& nd = g.node( n );
  bool v = false;
  switch ( nd.kind )
  {
  case gate_kind::pi: v = pi_values[static_cast<std::size_t>( g.pi_position( n ) )]; break;
  case gate_kind::not_gate: v = !eval_node( g, nd.fanin[0], pi_values, memo ); break;
  case gate_kind::and_gate:
  {
    auto const a = eval_node( g, nd.fanin[0], pi_values, memo );
    auto const b = eval_node( g, nd.fanin[1], pi_values, memo );
    v = a && b;
    break;
  }
  }
  memo[n] = v ? 1 : 0;
  return v;
}

inline bool eval_node( aig const& g, node_index n, std::vector<bool> const& pi_values )
{
  std::vector<int> memo( g.size(), -1 );
  return eval_node( g, n, pi_values, memo );
}

inline std::vector<bool> pattern_bits( std::uint64_t pattern, std::size_t num_pis )
{
  std::vector<bool> v( num_pis );
  for ( std::size_t k = 0; k < num_pis; ++k )
  {
    v[k] = ( pattern >> k ) & 1u;
  }
  return v;
}

/* full truth table of a node as a vector of bools, pattern p -> PI k = bit k of p */
inline std::vector<bool> truth_table( aig const& g, node_index n )
{
  std::vector<bool> tt;
  for ( std::uint64_t p = 0; p < ( std::uint64_t{ 1 } << g.num_pis() ); ++p )
  {
    tt.push_back( eval_node( g, n, pattern_bits( p, g.num_pis() ) ) );
  }
  return tt;
}

inline void collect_tfi( aig const& g, node_index n, std::set<node_index>& out )
{
  for ( auto f : g.fanins( n ) )
  {
    if ( out.insert( f ).second )
    {
      collect_tfi( g, f, out );
    }
  }
}

/* transitive fan-in excluding n itself */
inline std::set<node_index> strict_tfi( aig const& g, node_index n )
{
  std::set<node_index> out;
  collect_tfi( g, n, out );
  return out;
}

inline std::set<node_index> pi_support( aig const& g, node_index n )
{
  auto tfi = strict_tfi( g, n );
  tfi.insert( n );
  std::set<node_index> out;
  for ( auto m : tfi )
  {
    if ( g.is_pi( m ) )
    {
      out.insert( m );
    }
  }
  return out;
}

inline bool common_predecessor( aig const& g, node_index i, node_index j )
{
  auto const a = strict_tfi( g, i );
  auto const b = strict_tfi( g, j );
  for ( auto m : a )
  {
    if ( m != i && m != j && b.count( m ) )
    {
      return true;
    }
  }
  return false;
}

inline std::uint32_t level_of( aig const& g, node_index n, std::vector<int>& memo )
{
  if ( memo[n] >= 0 )
  {
    return static_cast<std::uint32_t>( memo[n] );
  }
  std::uint32_t lvl = 0;
  for ( auto f : g.fanins( n ) )
  {
    lvl = std::max( lvl, level_of( g, f, memo ) + 1u );
  }
  memo[n] = static_cast<int>( lvl );
  return lvl;
}

inline std::uint32_t level_of( aig const& g, node_index n )
{
  std::vector<int> memo( g.size(), -1 );
  return level_of( g, n, memo );
}

inline double ones_fraction( signature const& s )
{
  std::size_t c = 0;
  for ( std::size_t k = 0; k < s.num_bits(); ++k )
  {
    c += s.bit( k );
  }
  return static_cast<double>( c ) / static_cast<double>( s.num_bits() );
}

inline double diff_fraction( signature const& a, signature const& b )
{
  std::size_t c = 0;
  for ( std::size_t k = 0; k < a.num_bits(); ++k )
  {
    c += a.bit( k ) != b.bit( k );
  }
  return static_cast<double>( c ) / static_cast<double>( a.num_bits() );
}

/* independent re-check of the four admission rules; returns an empty string when valid */
inline std::string check_pair( circuit_record const& r, pair_sample const& p )
{
  auto const& g = r.graph;
  if ( !( p.i < p.j ) )
  {
    return "not canonically ordered";
  }
  if ( pi_support( g, p.i ) != pi_support( g, p.j ) )
  {
    return "supports differ";
  }
  auto const pi = ones_fraction( r.signatures[p.i] ), pj = ones_fraction( r.signatures[p.j] );
  if ( std::abs( pi - pj ) > 0.05 + 1e-12 )
  {
    return "probability gap";
  }
  auto const li = level_of( g, p.i ), lj = level_of( g, p.j );
  if ( ( li > lj ? li - lj : lj - li ) > 5u )
  {
    return "level gap";
  }
  auto const d = diff_fraction( r.signatures[p.i], r.signatures[p.j] );
  if ( !( d <= 0.20 + 1e-12 || d >= 0.80 - 1e-12 ) )
  {
    return "mid-range distance";
  }
  if ( std::abs( d - p.dist_tt ) > 1e-15 || p.is_equivalent != ( d == 0.0 ) )
  {
    return "label mismatch";
  }
  return {};
}

/* exhaustive CNF check, 64 assignments per word: variables 1..6 vary inside a word, the rest across words */
inline bool cnf_satisfiable( std::uint32_t num_vars, std::vector<std::vector<int>> const& clauses )
{
  static constexpr std::uint64_t low[6] = { 0xAAAAAAAAAAAAAAAAull, 0xCCCCCCCCCCCCCCCCull, 0xF0F0F0F0F0F0F0F0ull,
                                            0xFF00FF00FF00FF00ull, 0xFFFF0000FFFF0000ull, 0xFFFFFFFF00000000ull };
  auto const inner = std::min<std::uint32_t>( num_vars, 6u );
  auto const valid = inner == 6u ? ~std::uint64_t{ 0 } : ( std::uint64_t{ 1 } << ( 1u << inner ) ) - 1u;
  auto const outer = num_vars > 6u ? std::uint64_t{ 1 } << ( num_vars - 6u ) : std::uint64_t{ 1 };
  std::vector<std::uint64_t> value( num_vars + 1u );
  for ( std::uint64_t w = 0; w < outer; ++w )
  {
    for ( std::uint32_t v = 1; v <= num_vars; ++v )
    {
      value[v] = v <= 6u ? low[v - 1u] : ( ( w >> ( v - 7u ) ) & 1u ) ? ~std::uint64_t{ 0 } : 0u;
    }
    auto alive = valid;
    for ( auto const& c : clauses )
    {
      std::uint64_t sat = 0;
      for ( auto l : c )
      {
        sat |= l > 0 ? value[static_cast<std::uint32_t>( l )] : ~value[static_cast<std::uint32_t>( -l )];
      }
      alive &= sat;
      if ( alive == 0u )
      {
        break;
      }
    }
    if ( alive != 0u )
    {
      return true;
    }
  }
  return false;
}

/* every satisfying assignment as a bitmask over variables 1..num_vars (bit v-1) */
inline std::vector<std::uint32_t> cnf_models( std::uint32_t num_vars, std::vector<std::vector<int>> const& clauses )
{
  std::vector<std::uint32_t> out;
  for ( std::uint32_t a = 0; a < ( 1u << num_vars ); ++a )
  {
    auto const ok = std::all_of( clauses.begin(), clauses.end(), [&]( auto const& c ) {
      return std::any_of( c.begin(), c.end(), [&]( int l ) {
        auto const bit = ( a >> ( std::abs( l ) - 1 ) ) & 1u;
        return l > 0 ? bit == 1u : bit == 0u;
      } );
    } );
    if ( ok )
    {
      out.push_back( a );
    }
  }
  return out;
}

} // namespace gatekit::oracle
