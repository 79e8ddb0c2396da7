#include "gatekit/aig.hpp"

#include "gatekit/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

namespace gatekit
{

namespace
{

constexpr node_index no_node = std::numeric_limits<node_index>::max();

} // namespace

std::string_view to_string( gate_kind kind ) noexcept
{
  switch ( kind )
  {
  case gate_kind::pi: return "PI";
  case gate_kind::and_gate: return "AND";
  case gate_kind::not_gate: return "NOT";
  }
  return "?";
}

/* aig */

std::size_t aig::num_ands() const noexcept
{
  return std::count_if( nodes_.begin(), nodes_.end(), []( auto const& n ) { return n.kind == gate_kind::and_gate; } );
}

std::size_t aig::num_nots() const noexcept
{
  return std::count_if( nodes_.begin(), nodes_.end(), []( auto const& n ) { return n.kind == gate_kind::not_gate; } );
}

void aig::check_node( node_index n ) const
{
  if ( n >= nodes_.size() )
  {
    throw error( errc::unknown_node, "node " + std::to_string( n ) + " of " + std::to_string( nodes_.size() ) );
  }
}

std::vector<std::vector<node_index>> aig::nodes_by_level() const
{
  std::vector<std::vector<node_index>> groups( nodes_.empty() ? 0u : depth_ + 1u );
  for ( node_index n = 0; n < nodes_.size(); ++n )
  {
    groups[levels_[n]].push_back( n );
  }
  return groups;
}

std::vector<std::vector<node_index>> aig::fanouts() const
{
  std::vector<std::vector<node_index>> out( nodes_.size() );
  for ( node_index n = 0; n < nodes_.size(); ++n )
  {
    for ( auto f : nodes_[n].fanins() )
    {
      out[f].push_back( n );
    }
  }
  return out;
}

/* aig_builder */

void aig_builder::check( node_index n ) const
{
  if ( n >= nodes_.size() )
  {
    throw error( errc::unknown_node, "fan-in " + std::to_string( n ) + " does not exist yet" );
  }
}

node_index aig_builder::add_pi()
{
  auto const id = static_cast<node_index>( nodes_.size() );
  nodes_.push_back( { gate_kind::pi, {} } );
  not_of_.push_back( no_node );
  pis_.push_back( id );
  return id;
}

node_index aig_builder::add_and( node_index a, node_index b )
{
  check( a );
  check( b );
  auto const id = static_cast<node_index>( nodes_.size() );
  nodes_.push_back( { gate_kind::and_gate, { a, b } } );
  not_of_.push_back( no_node );
  return id;
}

node_index aig_builder::add_not( node_index a )
{
  check( a );
  if ( not_of_[a] != no_node )
  {
    return not_of_[a];
  }
  auto const id = static_cast<node_index>( nodes_.size() );
  nodes_.push_back( { gate_kind::not_gate, { a, 0 } } );
  not_of_.push_back( no_node );
  not_of_[a] = id;
  return id;
}

void aig_builder::add_po( node_index n )
{
  check( n );
  pos_.push_back( n );
}

aig aig_builder::build() &&
{
  aig g;
  g.nodes_ = std::move( nodes_ );
  g.pis_ = std::move( pis_ );
  g.pos_ = std::move( pos_ );
  g.levels_ = levelize( g );
  g.depth_ = g.levels_.empty() ? 0u : *std::max_element( g.levels_.begin(), g.levels_.end() );
  g.pi_position_.assign( g.nodes_.size(), -1 );
  for ( std::size_t k = 0; k < g.pis_.size(); ++k )
  {
    g.pi_position_[g.pis_[k]] = static_cast<std::int64_t>( k );
  }
  return g;
}

/* structural queries */

std::vector<std::uint32_t> levelize( aig const& g )
{
  std::vector<std::uint32_t> levels( g.size(), 0u );
  auto const nodes = g.nodes();
  for ( node_index n = 0; n < nodes.size(); ++n )
  {
    std::uint32_t lvl = 0u;
    for ( auto f : nodes[n].fanins() )
    {
      lvl = std::max( lvl, levels[f] + 1u );
    }
    levels[n] = lvl;
  }
  return levels;
}

namespace
{

/* marks the transitive fan-in of `root` (including root) */
std::vector<bool> mark_tfi( aig const& g, node_index root )
{
  std::vector<bool> mark( g.size(), false );
  std::vector<node_index> stack{ root };
  mark[root] = true;
  while ( !stack.empty() )
  {
    auto const n = stack.back();
    stack.pop_back();
    for ( auto f : g.fanins( n ) )
    {
      if ( !mark[f] )
      {
        mark[f] = true;
        stack.push_back( f );
      }
    }
  }
  return mark;
}

} // namespace

cone support( aig const& g, node_index n )
{
  g.check_node( n );
  auto const mark = mark_tfi( g, n );
  cone c;
  c.root = n;
  for ( node_index m = 0; m < g.size(); ++m )
  {
    if ( mark[m] )
    {
      c.gates.push_back( m );
      if ( g.is_pi( m ) )
      {
        c.support.push_back( m );
      }
    }
  }
  return c;
}

bool has_common_predecessor( aig const& g, node_index i, node_index j )
{
  g.check_node( i );
  g.check_node( j );
  if ( i == j )
  {
    throw error( errc::identical_nodes, "common-predecessor query needs two distinct nodes" );
  }
  auto ti = mark_tfi( g, i );
  auto tj = mark_tfi( g, j );
  ti[i] = false;
  tj[j] = false;
  for ( node_index m = 0; m < g.size(); ++m )
  {
    if ( ti[m] && tj[m] && m != i && m != j )
    {
      return true;
    }
  }
  return false;
}

aig extract_cone( aig const& g, node_index root )
{
  auto const c = support( g, root );
  auto pis = c.support;
  std::sort( pis.begin(), pis.end(), [&]( auto a, auto b ) { return g.pi_position( a ) < g.pi_position( b ); } );

  aig_builder b;
  std::vector<node_index> map( g.size(), no_node );
  for ( auto p : pis )
  {
    map[p] = b.add_pi();
  }
  for ( auto n : c.gates )
  {
    auto const& nd = g.node( n );
    switch ( nd.kind )
    {
    case gate_kind::pi: break;
    case gate_kind::not_gate: map[n] = b.add_not( map[nd.fanin[0]] ); break;
    case gate_kind::and_gate: map[n] = b.add_and( map[nd.fanin[0]], map[nd.fanin[1]] ); break;
    }
  }
  b.add_po( map[root] );
  return std::move( b ).build();
}

fanin_index::fanin_index( aig const& g )
{
  auto const n = g.size();
  support_.reserve( n );
  tfi_.reserve( n );
  for ( node_index v = 0; v < n; ++v )
  {
    boost::dynamic_bitset<> sup( g.num_pis() );
    boost::dynamic_bitset<> tfi( n );
    if ( g.is_pi( v ) )
    {
      sup.set( static_cast<std::size_t>( g.pi_position( v ) ) );
    }
    for ( auto f : g.fanins( v ) )
    {
      sup |= support_[f];
      tfi |= tfi_[f];
      tfi.set( f );
    }
    support_.push_back( std::move( sup ) );
    tfi_.push_back( std::move( tfi ) );
  }
}

bool fanin_index::common_predecessor( node_index i, node_index j ) const
{
  if ( i == j )
  {
    throw error( errc::identical_nodes, "common-predecessor query needs two distinct nodes" );
  }
  return tfi_.at( i ).intersects( tfi_.at( j ) );
}

/* AIGER */

namespace
{

std::vector<std::uint64_t> parse_numbers( std::string_view line, std::size_t line_no )
{
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while ( pos < line.size() )
  {
    while ( pos < line.size() && ( line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r' ) )
    {
      ++pos;
    }
    if ( pos >= line.size() )
    {
      break;
    }
    std::uint64_t value{};
    auto const [ptr, ec] = std::from_chars( line.data() + pos, line.data() + line.size(), value );
    if ( ec != std::errc{} || ( ptr != line.data() + line.size() && *ptr != ' ' && *ptr != '\t' && *ptr != '\r' ) )
    {
      throw error( errc::malformed_header, "line " + std::to_string( line_no ) + ": expected unsigned integers" );
    }
    out.push_back( value );
    pos = static_cast<std::size_t>( ptr - line.data() );
  }
  return out;
}

} // namespace

aig parse_aiger( std::string_view text )
{
  std::vector<std::string_view> lines;
  {
    std::size_t start = 0;
    while ( start <= text.size() )
    {
      auto end = text.find( '\n', start );
      if ( end == std::string_view::npos )
      {
        end = text.size();
      }
      lines.push_back( text.substr( start, end - start ) );
      start = end + 1;
    }
  }

  if ( lines.empty() || lines[0].substr( 0, 4 ) != "aag " )
  {
    throw error( errc::malformed_header, "expected 'aag M I L O A'" );
  }
  auto const header = parse_numbers( lines[0].substr( 4 ), 1 );
  if ( header.size() != 5u )
  {
    throw error( errc::malformed_header, "expected 'aag M I L O A'" );
  }
  auto const [max_var, num_in, num_latch, num_out, num_and] = std::tuple{ header[0], header[1], header[2], header[3], header[4] };
  if ( num_latch != 0u )
  {
    throw error( errc::latches_unsupported, std::to_string( num_latch ) + " latches declared" );
  }
  if ( max_var < num_in + num_and || max_var > ( std::uint64_t{ 1 } << 30 ) )
  {
    throw error( errc::malformed_header, "M is inconsistent with I + A" );
  }
  if ( lines.size() < 1u + num_in + num_out + num_and )
  {
    throw error( errc::malformed_header, "document is truncated" );
  }

  auto const max_lit = 2u * max_var + 1u;
  auto check_lit = [&]( std::uint64_t lit, std::size_t line_no ) {
    if ( lit > max_lit )
    {
      throw error( errc::literal_out_of_range, "line " + std::to_string( line_no ) + ": literal " + std::to_string( lit ) + " exceeds " + std::to_string( max_lit ) );
    }
    if ( lit < 2u )
    {
      throw error( errc::constant_literal_unsupported, "line " + std::to_string( line_no ) );
    }
  };

  enum class var_state : std::uint8_t
  {
    undefined,
    input,
    gate
  };
  std::vector<var_state> state( max_var + 1u, var_state::undefined );
  std::vector<std::array<std::uint64_t, 2>> gate_def( max_var + 1u );
  std::vector<std::uint64_t> inputs, outputs, gate_order;

  std::size_t ln = 1;
  for ( std::uint64_t k = 0; k < num_in; ++k, ++ln )
  {
    auto const v = parse_numbers( lines[ln], ln + 1 );
    if ( v.size() != 1u )
    {
      throw error( errc::malformed_header, "line " + std::to_string( ln + 1 ) + ": input needs one literal" );
    }
    check_lit( v[0], ln + 1 );
    if ( v[0] & 1u || state[v[0] >> 1] != var_state::undefined )
    {
      throw error( errc::malformed_header, "line " + std::to_string( ln + 1 ) + ": invalid input literal" );
    }
    state[v[0] >> 1] = var_state::input;
    inputs.push_back( v[0] >> 1 );
  }
  for ( std::uint64_t k = 0; k < num_out; ++k, ++ln )
  {
    auto const v = parse_numbers( lines[ln], ln + 1 );
    if ( v.size() != 1u )
    {
      throw error( errc::malformed_header, "line " + std::to_string( ln + 1 ) + ": output needs one literal" );
    }
    check_lit( v[0], ln + 1 );
    outputs.push_back( v[0] );
  }
  for ( std::uint64_t k = 0; k < num_and; ++k, ++ln )
  {
    auto const v = parse_numbers( lines[ln], ln + 1 );
    if ( v.size() != 3u )
    {
      throw error( errc::malformed_header, "line " + std::to_string( ln + 1 ) + ": AND needs three literals" );
    }
    for ( auto lit : v )
    {
      check_lit( lit, ln + 1 );
    }
    if ( v[0] & 1u || state[v[0] >> 1] != var_state::undefined )
    {
      throw error( errc::malformed_header, "line " + std::to_string( ln + 1 ) + ": invalid AND output literal" );
    }
    state[v[0] >> 1] = var_state::gate;
    gate_def[v[0] >> 1] = { v[1], v[2] };
    gate_order.push_back( v[0] >> 1 );
  }

  aig_builder b;
  std::vector<node_index> node_of( max_var + 1u, no_node );
  for ( auto var : inputs )
  {
    node_of[var] = b.add_pi();
  }

  auto node_for_lit = [&]( std::uint64_t lit ) {
    auto const n = node_of[lit >> 1];
    return ( lit & 1u ) ? b.add_not( n ) : n;
  };

  /* AND definitions may appear in any order; emit them dependencies-first */
  std::vector<std::uint8_t> visit( max_var + 1u, 0u ); // 0 new, 1 on stack, 2 done
  for ( auto top : gate_order )
  {
    if ( visit[top] == 2u )
    {
      continue;
    }
    std::vector<std::pair<std::uint64_t, int>> stack{ { top, 0 } };
    visit[top] = 1u;
    while ( !stack.empty() )
    {
      auto& [var, next] = stack.back();
      if ( next < 2 )
      {
        auto const child = gate_def[var][next++] >> 1;
        if ( state[child] == var_state::undefined )
        {
          throw error( errc::literal_out_of_range, "variable " + std::to_string( child ) + " is never defined" );
        }
        if ( state[child] == var_state::gate )
        {
          if ( visit[child] == 1u )
          {
            throw error( errc::cyclic_definition, "variable " + std::to_string( child ) + " depends on itself" );
          }
          if ( visit[child] == 0u )
          {
            visit[child] = 1u;
            stack.emplace_back( child, 0 );
          }
        }
        continue;
      }
      auto const a = node_for_lit( gate_def[var][0] );
      auto const c = node_for_lit( gate_def[var][1] );
      node_of[var] = b.add_and( a, c );
      visit[var] = 2u;
      stack.pop_back();
    }
  }

  for ( auto lit : outputs )
  {
    if ( state[lit >> 1] == var_state::undefined )
    {
      throw error( errc::literal_out_of_range, "output references undefined variable " + std::to_string( lit >> 1 ) );
    }
    b.add_po( node_for_lit( lit ) );
  }
  return std::move( b ).build();
}

aig read_aiger( std::string const& path )
{
  std::ifstream in( path, std::ios::binary );
  if ( !in )
  {
    throw error( errc::io_failure, "cannot open " + path );
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_aiger( ss.str() );
}

std::string write_aiger( aig const& g )
{
  std::vector<std::uint64_t> lit( g.size(), 0u );
  std::uint64_t next_var = 1u;
  for ( auto p : g.pis() )
  {
    lit[p] = 2u * next_var++;
  }
  std::ostringstream ands;
  std::size_t num_and = 0u;
  for ( node_index n = 0; n < g.size(); ++n )
  {
    auto const& nd = g.node( n );
    if ( nd.kind == gate_kind::not_gate )
    {
      lit[n] = lit[nd.fanin[0]] ^ 1u;
    }
    else if ( nd.kind == gate_kind::and_gate )
    {
      lit[n] = 2u * next_var++;
      ands << lit[n] << ' ' << lit[nd.fanin[0]] << ' ' << lit[nd.fanin[1]] << '\n';
      ++num_and;
    }
  }
  std::ostringstream out;
  out << "aag " << ( next_var - 1u ) << ' ' << g.num_pis() << " 0 " << g.num_pos() << ' ' << num_and << '\n';
  for ( auto p : g.pis() )
  {
    out << lit[p] << '\n';
  }
  for ( auto p : g.pos() )
  {
    out << lit[p] << '\n';
  }
  out << ands.str();
  return out.str();
}

void write_aiger( aig const& g, std::string const& path )
{
  std::ofstream out( path, std::ios::binary );
  if ( !out )
  {
    throw error( errc::io_failure, "cannot write " + path );
  }
  out << write_aiger( g );
  if ( !out )
  {
    throw error( errc::io_failure, "write failed for " + path );
  }
}

aig canonicalize( aig const& g )
{
  return parse_aiger( write_aiger( g ) );
}

} // namespace gatekit
