// Small hand-built records shared by the training tests and the acceptance binary.

#pragma once

#include "gatekit/dataset.hpp"
#include "gatekit/random.hpp"

#include <algorithm>
#include <cstdlib>
#include <vector>

namespace gatekit::fixtures
{

/* 3 PIs, 6 gates over 3 levels, with hand-picked function and reconvergence pairs */
inline circuit_record six_gate_record()
{
  aig_builder b;
  auto const x1 = b.add_pi(), x2 = b.add_pi(), x3 = b.add_pi();
  auto const a = b.add_and( x1, x2 );
  auto const c = b.add_and( x2, x3 );
  auto const na = b.add_not( a );
  auto const r = b.add_and( c, x1 );
  auto const l = b.add_and( a, c );
  auto const top = b.add_and( na, r );
  b.add_po( l );
  b.add_po( top );
  auto record = simulate_record( std::move( b ).build(), sim_config{ 64u, 0u } );
  // canonical numbering keeps PIs first, so gates are 3..8
  record.pairs = { { 3, 4, 0.25, false }, { 3, 7, 0.125, false }, { 5, 6, 0.375, false }, { 6, 8, 0.5, false }, { 4, 7, 0.0, true } };
  record.rc_pairs = { { 3, 4, true }, { 5, 6, true }, { 3, 5, false }, { 4, 8, true }, { 6, 7, false } };
  return record;
}

/* uniform random k-CNF without repeated variables inside a clause */
inline std::vector<std::vector<int>> random_kcnf( std::uint32_t num_vars, std::size_t num_clauses, std::uint32_t k, rng_engine& rng )
{
  std::vector<std::vector<int>> out;
  for ( std::size_t c = 0; c < num_clauses; ++c )
  {
    std::vector<int> clause;
    while ( clause.size() < std::min( k, num_vars ) )
    {
      auto const v = static_cast<int>( 1u + uniform_index( rng, num_vars ) );
      if ( std::none_of( clause.begin(), clause.end(), [&]( int l ) { return std::abs( l ) == v; } ) )
      {
        clause.push_back( uniform01( rng ) < 0.5 ? v : -v );
      }
    }
    out.push_back( std::move( clause ) );
  }
  return out;
}

} // namespace gatekit::fixtures
