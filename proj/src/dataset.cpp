#include "gatekit/dataset.hpp"

#include "gatekit/error.hpp"
#include "gatekit/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gatekit
{

using json = nlohmann::json;

namespace
{

constexpr int dataset_version = 1;
constexpr double boundary_slack = 1e-9;

std::uint64_t fnv1a( std::string const& s )
{
  std::uint64_t h = 0xcbf29ce484222325ull;
  for ( unsigned char c : s )
  {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64( std::uint64_t v )
{
  char buf[17];
  std::snprintf( buf, sizeof( buf ), "%016llx", static_cast<unsigned long long>( v ) );
  return buf;
}

std::uint32_t level_gap( aig const& g, node_index i, node_index j )
{
  auto const a = g.level( i ), b = g.level( j );
  return a > b ? a - b : b - a;
}

} // namespace

circuit_record simulate_record( aig const& g, sim_config const& sim )
{
  circuit_record r;
  r.graph = canonicalize( g );
  r.signatures = simulate( r.graph, input_patterns( r.graph.num_pis(), sim ) );
  r.probs.reserve( r.signatures.size() );
  for ( auto const& s : r.signatures )
  {
    r.probs.push_back( logic_prob( s ) );
  }
  return r;
}

circuit_record make_record( aig const& g, dataset_config const& config )
{
  auto r = simulate_record( g, config.sim );
  r.pairs = sample_function_pairs( r, config.max_pairs, config.seed, config.constraints );
  r.rc_pairs = sample_rc_pairs( r, config.max_rc_pairs, config.seed ^ 0x9e3779b97f4a7c15ull, config.constraints.max_level_gap );
  return r;
}

bool admissible_pair( circuit_record const& record, fanin_index const& index, node_index i, node_index j, pair_constraints const& c )
{
  auto const& g = record.graph;
  if ( i == j || g.is_pi( i ) || g.is_pi( j ) )
  {
    return false;
  }
  if ( index.support( i ) != index.support( j ) )
  {
    return false;
  }
  if ( level_gap( g, i, j ) > c.max_level_gap )
  {
    return false;
  }
  auto const& si = record.signatures[i];
  auto const& sj = record.signatures[j];
  auto const bits = static_cast<double>( si.num_bits() );
  auto const pi = si.popcount(), pj = sj.popcount();
  auto const pop_gap = static_cast<double>( pi > pj ? pi - pj : pj - pi );
  if ( pop_gap > c.max_prob_gap * bits + boundary_slack )
  {
    return false;
  }
  auto const hd = static_cast<double>( hamming_distance( si, sj ) );
  return hd <= c.near_dist * bits + boundary_slack || hd >= c.far_dist * bits - boundary_slack;
}

std::vector<pair_sample> sample_function_pairs( circuit_record const& record, std::size_t max_pairs, std::uint64_t seed, pair_constraints const& c )
{
  auto const& g = record.graph;
  fanin_index const index( g );
  std::vector<std::pair<node_index, node_index>> candidates;
  for ( node_index i = 0; i < g.size(); ++i )
  {
    for ( node_index j = i + 1u; j < g.size(); ++j )
    {
      if ( admissible_pair( record, index, i, j, c ) )
      {
        candidates.emplace_back( i, j );
      }
    }
  }
  auto rng = make_rng( seed, 0x70616972u );
  shuffle( candidates, rng );
  candidates.resize( std::min( candidates.size(), max_pairs ) );
  std::sort( candidates.begin(), candidates.end() );

  std::vector<pair_sample> out;
  out.reserve( candidates.size() );
  for ( auto [i, j] : candidates )
  {
    auto const hd = hamming_distance( record.signatures[i], record.signatures[j] );
    out.push_back( { i, j, tt_distance( record.signatures[i], record.signatures[j] ), hd == 0u } );
  }
  return out;
}

std::vector<rc_sample> sample_rc_pairs( circuit_record const& record, std::size_t max_pairs, std::uint64_t seed, std::uint32_t max_level_gap )
{
  auto const& g = record.graph;
  fanin_index const index( g );
  std::vector<rc_sample> positives, negatives;
  for ( node_index i = 0; i < g.size(); ++i )
  {
    if ( g.is_pi( i ) )
    {
      continue;
    }
    for ( node_index j = i + 1u; j < g.size(); ++j )
    {
      if ( g.is_pi( j ) || level_gap( g, i, j ) > max_level_gap )
      {
        continue;
      }
      auto const label = index.common_predecessor( i, j );
      ( label ? positives : negatives ).push_back( { i, j, label } );
    }
  }
  auto rng = make_rng( seed, 0x72637063u );
  shuffle( positives, rng );
  shuffle( negatives, rng );

  std::size_t take_pos = 0u, take_neg = 0u;
  if ( positives.empty() || negatives.empty() )
  {
    take_pos = std::min( positives.size(), max_pairs );
    take_neg = std::min( negatives.size(), max_pairs );
  }
  else
  {
    auto const each = std::min( { positives.size(), negatives.size(), std::max<std::size_t>( max_pairs / 2u, 1u ) } );
    take_pos = take_neg = each;
  }
  std::vector<rc_sample> out( positives.begin(), positives.begin() + static_cast<std::ptrdiff_t>( take_pos ) );
  out.insert( out.end(), negatives.begin(), negatives.begin() + static_cast<std::ptrdiff_t>( take_neg ) );
  std::sort( out.begin(), out.end(), []( auto const& a, auto const& b ) { return std::tie( a.i, a.j ) < std::tie( b.i, b.j ); } );
  return out;
}

std::vector<circuit_record> synthetic_corpus( std::size_t count, random_aig_config const& base, dataset_config const& config )
{
  auto rng = make_rng( config.seed, 0x636f7270u );
  std::vector<circuit_record> out;
  out.reserve( count );
  auto const min_pis = std::max<std::size_t>( 2u, base.num_pis > 4u ? base.num_pis - 4u : 2u );
  for ( std::size_t k = 0; k < count; ++k )
  {
    auto cfg = base;
    cfg.seed = base.seed + k;
    cfg.num_pis = min_pis + uniform_index( rng, base.num_pis - min_pis + 1u );
    cfg.max_gates = base.max_gates / 2u + uniform_index( rng, base.max_gates - base.max_gates / 2u + 1u );
    auto rec_cfg = config;
    rec_cfg.seed = config.seed * 1000003ull + k;
    out.push_back( make_record( random_aig( cfg ), rec_cfg ) );
  }
  return out;
}

/* file format */

namespace
{

json record_to_json( circuit_record const& r )
{
  auto const text = write_aiger( r.graph );
  if ( parse_aiger( text ).nodes().size() != r.graph.size() || write_aiger( parse_aiger( text ) ) != text )
  {
    throw error( errc::bad_config, "record AIG is not in canonical AIGER numbering" );
  }
  json j;
  j["aig"] = text;
  j["num_patterns"] = r.signatures.empty() ? 0u : r.signatures.front().num_bits();
  json words = json::array();
  for ( auto const& s : r.signatures )
  {
    words.push_back( std::vector<std::uint64_t>( s.words().begin(), s.words().end() ) );
  }
  j["sig_words"] = std::move( words );
  j["probs"] = r.probs;
  json pairs = json::array();
  for ( auto const& p : r.pairs )
  {
    pairs.push_back( json::array( { p.i, p.j, p.dist_tt, p.is_equivalent } ) );
  }
  j["pairs"] = std::move( pairs );
  json rc = json::array();
  for ( auto const& p : r.rc_pairs )
  {
    rc.push_back( json::array( { p.i, p.j, p.label } ) );
  }
  j["rc_pairs"] = std::move( rc );
  j["checksum"] = hex64( fnv1a( j.dump() ) );
  return j;
}

circuit_record record_from_json( json j, std::size_t line_no )
{
  auto const where = "record on line " + std::to_string( line_no );
  if ( !j.is_object() || !j.contains( "checksum" ) )
  {
    throw error( errc::checksum_mismatch, where + " has no checksum" );
  }
  auto const stored = j["checksum"].get<std::string>();
  j.erase( "checksum" );
  if ( hex64( fnv1a( j.dump() ) ) != stored )
  {
    throw error( errc::checksum_mismatch, where );
  }

  try
  {
    circuit_record r;
    r.graph = parse_aiger( j.at( "aig" ).get<std::string>() );
    auto const bits = j.at( "num_patterns" ).get<std::size_t>();
    for ( auto const& w : j.at( "sig_words" ) )
    {
      r.signatures.emplace_back( w.get<std::vector<std::uint64_t>>(), bits );
    }
    r.probs = j.at( "probs" ).get<std::vector<double>>();
    for ( auto const& p : j.at( "pairs" ) )
    {
      r.pairs.push_back( { p.at( 0 ).get<node_index>(), p.at( 1 ).get<node_index>(), p.at( 2 ).get<double>(), p.at( 3 ).get<bool>() } );
    }
    for ( auto const& p : j.at( "rc_pairs" ) )
    {
      r.rc_pairs.push_back( { p.at( 0 ).get<node_index>(), p.at( 1 ).get<node_index>(), p.at( 2 ).get<bool>() } );
    }
    if ( r.signatures.size() != r.graph.size() || r.probs.size() != r.graph.size() )
    {
      throw error( errc::io_failure, where + ": per-node arrays do not match the AIG" );
    }
    return r;
  }
  catch ( json::exception const& e )
  {
    throw error( errc::io_failure, where + ": " + e.what() );
  }
}

} // namespace

std::string serialize_dataset( std::span<circuit_record const> records )
{
  std::string out = json{ { "gatekit_dataset", dataset_version } }.dump() + "\n";
  for ( auto const& r : records )
  {
    out += record_to_json( r ).dump();
    out += '\n';
  }
  return out;
}

std::vector<circuit_record> parse_dataset( std::string const& text )
{
  std::istringstream in( text );
  std::string line;
  if ( !std::getline( in, line ) )
  {
    throw error( errc::version_mismatch, "empty dataset" );
  }
  auto const header = json::parse( line, nullptr, false );
  if ( header.is_discarded() || !header.is_object() || !header.contains( "gatekit_dataset" ) || header["gatekit_dataset"] != dataset_version )
  {
    throw error( errc::version_mismatch, "expected header {\"gatekit_dataset\": 1}" );
  }
  std::vector<circuit_record> out;
  std::size_t line_no = 1u;
  while ( std::getline( in, line ) )
  {
    ++line_no;
    if ( line.empty() )
    {
      continue;
    }
    auto j = json::parse( line, nullptr, false );
    if ( j.is_discarded() )
    {
      throw error( errc::io_failure, "line " + std::to_string( line_no ) + " is not valid JSON" );
    }
    out.push_back( record_from_json( std::move( j ), line_no ) );
  }
  return out;
}

void write_dataset( std::span<circuit_record const> records, std::string const& path )
{
  std::ofstream out( path, std::ios::binary );
  if ( !out )
  {
    throw error( errc::io_failure, "cannot write " + path );
  }
  out << serialize_dataset( records );
  if ( !out )
  {
    throw error( errc::io_failure, "write failed for " + path );
  }
}

std::vector<circuit_record> read_dataset( std::string const& path )
{
  std::ifstream in( path, std::ios::binary );
  if ( !in )
  {
    throw error( errc::io_failure, "cannot open " + path );
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_dataset( ss.str() );
}

} // namespace gatekit
