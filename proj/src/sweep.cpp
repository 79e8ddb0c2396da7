#include "gatekit/sweep.hpp"

#include "gatekit/error.hpp"
#include "gatekit/random.hpp"
#include "gatekit/sat.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace gatekit
{

namespace
{

bool signature_less( signature const& a, signature const& b )
{
  auto const wa = a.words(), wb = b.words();
  return std::lexicographical_compare( wa.begin(), wa.end(), wb.begin(), wb.end() );
}

/* group live nodes by full signature; classes ordered by smallest member */
std::vector<equiv_class> group( std::vector<signature> const& sigs, std::vector<node_index> const& representative )
{
  std::vector<node_index> order;
  for ( node_index n = 0; n < sigs.size(); ++n )
  {
    if ( representative[n] == n )
    {
      order.push_back( n );
    }
  }
  std::stable_sort( order.begin(), order.end(), [&]( auto x, auto y ) { return signature_less( sigs[x], sigs[y] ); } );
  std::vector<equiv_class> out;
  for ( std::size_t k = 0; k < order.size(); )
  {
    auto e = k + 1u;
    while ( e < order.size() && sigs[order[e]] == sigs[order[k]] )
    {
      ++e;
    }
    if ( e - k >= 2u )
    {
      equiv_class c;
      c.members.assign( order.begin() + static_cast<std::ptrdiff_t>( k ), order.begin() + static_cast<std::ptrdiff_t>( e ) );
      std::sort( c.members.begin(), c.members.end() );
      out.push_back( std::move( c ) );
    }
    k = e;
  }
  std::sort( out.begin(), out.end(), []( auto const& a, auto const& b ) { return a.members.front() < b.members.front(); } );
  return out;
}

/* values of every node under one PI assignment */
std::vector<bool> evaluate_pattern( aig const& g, std::vector<bool> const& pattern )
{
  std::vector<bool> v( g.size() );
  for ( node_index n = 0; n < g.size(); ++n )
  {
    auto const fi = g.fanins( n );
    switch ( g.kind( n ) )
    {
    case gate_kind::pi: v[n] = pattern[static_cast<std::size_t>( g.pi_position( n ) )]; break;
    case gate_kind::not_gate: v[n] = !v[fi[0]]; break;
    case gate_kind::and_gate: v[n] = v[fi[0]] && v[fi[1]]; break;
    }
  }
  return v;
}

void merge( sweep_state& s, node_index keep, node_index drop )
{
  for ( auto& r : s.representative )
  {
    if ( r == drop )
    {
      r = keep;
    }
  }
  for ( auto it = s.classes.begin(); it != s.classes.end(); ++it )
  {
    auto& m = it->members;
    auto const pos = std::find( m.begin(), m.end(), drop );
    if ( pos != m.end() )
    {
      m.erase( pos );
      if ( m.size() < 2u )
      {
        s.classes.erase( it );
      }
      break;
    }
  }
  ++s.stats.merges;
}

} // namespace

sweep_state initial_classes( aig const& g, sim_config const& sim )
{
  sweep_state s;
  s.graph = g;
  s.signatures = simulate( g, input_patterns( g.num_pis(), sim ) );
  s.representative.resize( g.size() );
  std::iota( s.representative.begin(), s.representative.end(), node_index{ 0 } );
  s.classes = group( s.signatures, s.representative );
  return s;
}

std::vector<equiv_class> regroup( sweep_state const& state ) { return group( state.signatures, state.representative ); }

std::vector<std::pair<node_index, node_index>> rank_candidate_pairs( sweep_state const& state, grad::matrix const* hf )
{
  std::vector<std::pair<node_index, node_index>> pairs;
  for ( auto const& c : state.classes )
  {
    for ( std::size_t a = 0; a < c.members.size(); ++a )
    {
      for ( auto b = a + 1u; b < c.members.size(); ++b )
      {
        pairs.emplace_back( c.members[a], c.members[b] );
      }
    }
  }
  if ( !hf )
  {
    std::sort( pairs.begin(), pairs.end() );
    return pairs;
  }
  if ( hf->rows() < static_cast<Eigen::Index>( state.graph.size() ) )
  {
    throw error( errc::model_embedding_missing, "embedding matrix has " + std::to_string( hf->rows() ) + " rows for " +
                                                    std::to_string( state.graph.size() ) + " nodes" );
  }
  struct keyed
  {
    double sim;
    std::uint32_t level_sum;
    std::pair<node_index, node_index> p;
  };
  std::vector<keyed> keys;
  keys.reserve( pairs.size() );
  for ( auto p : pairs )
  {
    auto const a = hf->row( p.first ), b = hf->row( p.second );
    auto const den = a.norm() * b.norm();
    // a zero or non-finite embedding carries no similarity information: rank it last
    auto sim = den > 0.0 ? a.dot( b ) / den : -std::numeric_limits<double>::infinity();
    if ( !std::isfinite( sim ) )
    {
      sim = -std::numeric_limits<double>::infinity();
    }
    keys.push_back( { sim, state.graph.level( p.first ) + state.graph.level( p.second ), p } );
  }
  std::sort( keys.begin(), keys.end(), []( auto const& x, auto const& y ) {
    if ( x.sim != y.sim )
    {
      return x.sim > y.sim;
    }
    if ( x.level_sum != y.level_sum )
    {
      return x.level_sum < y.level_sum;
    }
    return x.p < y.p;
  } );
  for ( std::size_t k = 0; k < keys.size(); ++k )
  {
    pairs[k] = keys[k].p;
  }
  return pairs;
}

void refine_with_counterexample( sweep_state& state, std::vector<bool> const& pattern )
{
  auto const& g = state.graph;
  if ( pattern.size() != g.num_pis() )
  {
    throw error( errc::incomplete_pattern, "pattern has " + std::to_string( pattern.size() ) + " values for " + std::to_string( g.num_pis() ) + " PIs" );
  }
  auto const bits = evaluate_pattern( g, pattern );
  for ( node_index n = 0; n < g.size(); ++n )
  {
    state.signatures[n].push_back( bits[n] );
  }
  std::vector<equiv_class> next;
  for ( auto const& c : state.classes )
  {
    equiv_class zero, one;
    for ( auto m : c.members )
    {
      ( bits[m] ? one : zero ).members.push_back( m );
    }
    for ( auto* part : { &zero, &one } )
    {
      if ( part->members.size() >= 2u )
      {
        next.push_back( std::move( *part ) );
      }
    }
  }
  std::sort( next.begin(), next.end(), []( auto const& a, auto const& b ) { return a.members.front() < b.members.front(); } );
  state.classes = std::move( next );
  ++state.stats.refinements;
}

aig rebuild_reduced( aig const& g, std::vector<node_index> const& representative )
{
  auto rep = [&]( node_index n ) { return representative.at( n ); };
  std::vector<bool> needed( g.size(), false );
  for ( auto p : g.pos() )
  {
    needed[rep( p )] = true;
  }
  for ( auto n = g.size(); n-- > 0u; )
  {
    if ( needed[n] )
    {
      for ( auto f : g.fanins( n ) )
      {
        needed[rep( f )] = true;
      }
    }
  }
  aig_builder b;
  std::vector<node_index> map( g.size(), 0u );
  for ( node_index n = 0; n < g.size(); ++n )
  {
    auto const fi = g.fanins( n );
    switch ( g.kind( n ) )
    {
    case gate_kind::pi: map[n] = b.add_pi(); break;
    case gate_kind::not_gate:
      if ( rep( n ) == n && needed[n] )
      {
        map[n] = b.add_not( map[rep( fi[0] )] );
      }
      break;
    case gate_kind::and_gate:
      if ( rep( n ) == n && needed[n] )
      {
        map[n] = b.add_and( map[rep( fi[0] )], map[rep( fi[1] )] );
      }
      break;
    }
  }
  for ( auto p : g.pos() )
  {
    b.add_po( map[rep( p )] );
  }
  return std::move( b ).build();
}

bool outputs_equivalent( aig const& a, aig const& b, std::uint64_t seed )
{
  if ( a.num_pis() != b.num_pis() || a.num_pos() != b.num_pos() )
  {
    return false;
  }
  auto const pis = input_patterns( a.num_pis(), sim_config{ a.num_pis() <= 16u ? std::size_t{ 1 } << 16 : std::size_t{ 1 } << 20, seed } );
  auto const sa = simulate( a, pis ), sb = simulate( b, pis );
  for ( std::size_t k = 0; k < a.num_pos(); ++k )
  {
    if ( !( sa[a.pos()[k]] == sb[b.pos()[k]] ) )
    {
      return false;
    }
  }
  return true;
}

sweep_result sweep( aig const& g, grad::matrix const* hf, sweep_config const& config )
{
  auto const start = std::chrono::steady_clock::now();
  auto state = initial_classes( g, config.sim );
  state.stats.ands_before = g.num_ands();
  auto const ranked = rank_candidate_pairs( state, hf );

  // a pair stays a candidate while both nodes are live and in the same class
  auto candidate = [&]( std::pair<node_index, node_index> p ) {
    for ( auto const& c : state.classes )
    {
      auto const& m = c.members;
      if ( std::binary_search( m.begin(), m.end(), p.first ) )
      {
        return std::binary_search( m.begin(), m.end(), p.second );
      }
    }
    return false;
  };

  solver_options opt;
  opt.max_conflicts = config.conflict_budget;
  std::vector<std::pair<node_index, node_index>> deferred;
  auto check = [&]( std::pair<node_index, node_index> p, bool last_try ) {
    auto const [i, j] = p;
    auto const f = miter( g, i, j );
    auto const r = solve( f, nullptr, opt );
    ++state.stats.sat_calls;
    switch ( r.status )
    {
    case sat_status::unsat:
      ++state.stats.sat_unsat;
      merge( state, i, j );
      break;
    case sat_status::sat:
    {
      ++state.stats.sat_sat;
      auto const pattern = input_pattern( g, f, r.model );
      auto const v = evaluate_pattern( g, pattern );
      if ( v[i] == v[j] )
      {
        throw std::logic_error( "counterexample does not distinguish the miter inputs" );
      }
      refine_with_counterexample( state, pattern );
      break;
    }
    case sat_status::unknown:
      ++state.stats.sat_unknown;
      if ( last_try )
      {
        state.stats.budget_exhausted = true;
      }
      else
      {
        deferred.push_back( p );
      }
      break;
    }
  };
  auto out_of_calls = [&]() { return config.max_sat_calls > 0u && state.stats.sat_calls >= config.max_sat_calls; };

  for ( int round = 0; round < 2; ++round )
  {
    auto const& queue = round == 0 ? ranked : std::vector<std::pair<node_index, node_index>>( deferred );
    for ( auto p : queue )
    {
      if ( !candidate( p ) )
      {
        continue;
      }
      if ( out_of_calls() )
      {
        state.stats.budget_exhausted = true;
        break;
      }
      check( p, round == 1 );
    }
  }

  sweep_result res;
  res.graph = rebuild_reduced( g, state.representative );
  state.stats.ands_after = res.graph.num_ands();
  res.verified = outputs_equivalent( g, res.graph );
  state.stats.runtime_seconds = std::chrono::duration<double>( std::chrono::steady_clock::now() - start ).count();
  res.stats = state.stats;
  return res;
}

std::string sweep_stats_json( sweep_stats const& s )
{
  nlohmann::ordered_json j;
  j["sat_calls"] = s.sat_calls;
  j["sat_sat"] = s.sat_sat;
  j["sat_unsat"] = s.sat_unsat;
  j["sat_unknown"] = s.sat_unknown;
  j["merges"] = s.merges;
  j["refinements"] = s.refinements;
  j["ands_before"] = s.ands_before;
  j["ands_after"] = s.ands_after;
  j["budget_exhausted"] = s.budget_exhausted;
  j["runtime_seconds"] = s.runtime_seconds;
  return j.dump( 2 ) + "\n";
}

} // namespace gatekit
