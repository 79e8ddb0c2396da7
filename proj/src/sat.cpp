#include "gatekit/sat.hpp"

#include "gatekit/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace gatekit
{

/* encoding */

namespace
{

void encode_gate( aig const& g, node_index n, std::vector<std::uint32_t> const& var, std::vector<std::vector<int>>& out )
{
  auto const c = static_cast<int>( var[n] );
  auto const fi = g.fanins( n );
  if ( g.kind( n ) == gate_kind::and_gate )
  {
    auto const a = static_cast<int>( var[fi[0]] ), b = static_cast<int>( var[fi[1]] );
    out.push_back( { -c, a } );
    out.push_back( { -c, b } );
    out.push_back( { c, -a, -b } );
  }
  else if ( g.kind( n ) == gate_kind::not_gate )
  {
    auto const a = static_cast<int>( var[fi[0]] );
    out.push_back( { -c, -a } );
    out.push_back( { c, a } );
  }
}

/* PIs get 1..num_pis; gates of the given cones follow in node order */
cnf encode_cones( aig const& g, std::vector<node_index> const& roots )
{
  cnf f;
  f.var_of_node.assign( g.size(), 0u );
  for ( auto p : g.pis() )
  {
    f.var_of_node[p] = ++f.num_vars;
  }
  std::vector<node_index> gates;
  for ( auto r : roots )
  {
    auto const c = support( g, r );
    gates.insert( gates.end(), c.gates.begin(), c.gates.end() );
  }
  std::sort( gates.begin(), gates.end() );
  gates.erase( std::unique( gates.begin(), gates.end() ), gates.end() );
  for ( auto n : gates )
  {
    if ( !g.is_pi( n ) )
    {
      f.var_of_node[n] = ++f.num_vars;
      encode_gate( g, n, f.var_of_node, f.clauses );
    }
  }
  return f;
}

void check_node( aig const& g, node_index n )
{
  if ( n >= g.size() )
  {
    throw error( errc::unknown_node, "node " + std::to_string( n ) + " out of range" );
  }
}

} // namespace

cnf tseitin( aig const& g, node_index node, bool value )
{
  check_node( g, node );
  auto f = encode_cones( g, { node } );
  auto const v = static_cast<int>( f.var_of_node[node] );
  f.clauses.push_back( { value ? v : -v } );
  return f;
}

cnf miter( aig const& g, node_index a, node_index b )
{
  check_node( g, a );
  check_node( g, b );
  if ( a == b )
  {
    throw error( errc::identical_nodes, "miter of node " + std::to_string( a ) + " with itself" );
  }
  auto f = encode_cones( g, { a, b } );
  auto const x = static_cast<int>( ++f.num_vars );
  auto const va = static_cast<int>( f.var_of_node[a] ), vb = static_cast<int>( f.var_of_node[b] );
  // x <-> a xor b, x asserted
  f.clauses.push_back( { -x, va, vb } );
  f.clauses.push_back( { -x, -va, -vb } );
  f.clauses.push_back( { x, -va, vb } );
  f.clauses.push_back( { x, va, -vb } );
  f.clauses.push_back( { x } );
  return f;
}

std::vector<bool> input_pattern( aig const& g, cnf const& f, std::vector<bool> const& model )
{
  std::vector<bool> out;
  out.reserve( g.num_pis() );
  for ( auto p : g.pis() )
  {
    auto const v = f.var_of_node.at( p );
    if ( v == 0u || v >= model.size() )
    {
      throw error( errc::incomplete_pattern, "model does not cover PI " + std::to_string( p ) );
    }
    out.push_back( model[v] );
  }
  return out;
}

/* DIMACS */

std::string write_dimacs( cnf const& f )
{
  std::ostringstream os;
  os << "p cnf " << f.num_vars << ' ' << f.clauses.size() << '\n';
  for ( auto const& c : f.clauses )
  {
    for ( auto l : c )
    {
      os << l << ' ';
    }
    os << "0\n";
  }
  return os.str();
}

cnf parse_dimacs( std::string const& text )
{
  cnf f;
  std::istringstream is( text );
  std::string line;
  bool header = false;
  std::size_t declared = 0;
  std::vector<int> current;
  while ( std::getline( is, line ) )
  {
    auto const first = line.find_first_not_of( " \t\r" );
    if ( first == std::string::npos || line[first] == 'c' )
    {
      continue;
    }
    if ( line[first] == '%' )
    {
      break; // SATLIB end marker
    }
    std::istringstream ls( line );
    if ( line[first] == 'p' )
    {
      std::string p, fmt;
      long long vars = -1, clauses = -1;
      ls >> p >> fmt >> vars >> clauses;
      if ( header || fmt != "cnf" || vars < 0 || clauses < 0 || ls.fail() )
      {
        throw error( errc::malformed_clause, "bad DIMACS header: " + line );
      }
      header = true;
      f.num_vars = static_cast<std::uint32_t>( vars );
      declared = static_cast<std::size_t>( clauses );
      continue;
    }
    if ( !header )
    {
      throw error( errc::malformed_clause, "clause before the 'p cnf' header" );
    }
    std::string tok;
    while ( ls >> tok )
    {
      char* end = nullptr;
      auto const v = std::strtoll( tok.c_str(), &end, 10 );
      if ( *end != '\0' )
      {
        throw error( errc::malformed_clause, "bad literal '" + tok + "'" );
      }
      if ( v == 0 )
      {
        f.clauses.push_back( std::move( current ) );
        current.clear();
        continue;
      }
      if ( std::llabs( v ) > static_cast<long long>( f.num_vars ) )
      {
        throw error( errc::malformed_clause, "literal " + tok + " exceeds the declared variable count" );
      }
      current.push_back( static_cast<int>( v ) );
    }
  }
  if ( !header )
  {
    throw error( errc::malformed_clause, "missing 'p cnf' header" );
  }
  if ( !current.empty() )
  {
    throw error( errc::malformed_clause, "last clause is not terminated by 0" );
  }
  if ( f.clauses.size() != declared )
  {
    throw error( errc::malformed_clause, "header declares " + std::to_string( declared ) + " clauses, found " + std::to_string( f.clauses.size() ) );
  }
  return f;
}

/* similarity index */

similarity_index::similarity_index( std::uint32_t num_vars, double delta ) : delta_( delta ), adj_( num_vars + 1u ) {}

similarity_index similarity_index::from_embeddings( cnf const& f, grad::matrix const& hf, double delta )
{
  similarity_index idx( f.num_vars, delta );
  std::vector<std::pair<std::uint32_t, Eigen::Index>> rows;
  for ( std::size_t n = 0; n < f.var_of_node.size(); ++n )
  {
    auto const v = f.var_of_node[n];
    if ( v != 0u && static_cast<Eigen::Index>( n ) < hf.rows() && hf.row( static_cast<Eigen::Index>( n ) ).allFinite() &&
         hf.row( static_cast<Eigen::Index>( n ) ).norm() > 0.0 )
    {
      rows.emplace_back( v, static_cast<Eigen::Index>( n ) );
    }
  }
  for ( std::size_t a = 0; a < rows.size(); ++a )
  {
    auto const ra = hf.row( rows[a].second );
    auto const na = ra.norm();
    for ( auto b = a + 1u; b < rows.size(); ++b )
    {
      auto const rb = hf.row( rows[b].second );
      if ( ra.dot( rb ) / ( na * rb.norm() ) > 1.0 - delta )
      {
        idx.link( rows[a].first, rows[b].first );
      }
    }
  }
  return idx;
}

void similarity_index::link( std::uint32_t a, std::uint32_t b )
{
  if ( a == b || a == 0u || b == 0u || a >= adj_.size() || b >= adj_.size() )
  {
    return;
  }
  auto add = [this]( std::uint32_t x, std::uint32_t y ) {
    auto& l = adj_[x];
    auto const it = std::lower_bound( l.begin(), l.end(), y );
    if ( it == l.end() || *it != y )
    {
      l.insert( it, y );
    }
  };
  add( a, b );
  add( b, a );
}

std::vector<std::uint32_t> const& similarity_index::neighbors( std::uint32_t var ) const
{
  static std::vector<std::uint32_t> const none;
  return var < adj_.size() ? adj_[var] : none;
}

std::size_t similarity_index::num_links() const noexcept
{
  std::size_t n = 0;
  for ( auto const& l : adj_ )
  {
    n += l.size();
  }
  return n / 2u;
}

std::string_view to_string( sat_status s ) noexcept
{
  switch ( s )
  {
  case sat_status::sat: return "SAT";
  case sat_status::unsat: return "UNSAT";
  default: return "UNKNOWN";
  }
}

/* CDCL */

namespace
{

using lit = std::uint32_t; // 2 * var + negated, var 0-based
constexpr std::uint32_t no_reason = ~std::uint32_t{ 0 };

constexpr lit make_lit( std::uint32_t var, bool negated ) { return 2u * var + ( negated ? 1u : 0u ); }
constexpr std::uint32_t var_of( lit l ) { return l >> 1; }
constexpr bool negated( lit l ) { return ( l & 1u ) != 0u; }

int to_dimacs( lit l ) { return negated( l ) ? -static_cast<int>( var_of( l ) + 1u ) : static_cast<int>( var_of( l ) + 1u ); }

/* reluctant doubling: 1 1 2 1 1 2 4 ... */
double luby( double y, std::uint64_t x )
{
  std::uint64_t size = 1, seq = 0;
  while ( size < x + 1u )
  {
    ++seq;
    size = 2u * size + 1u;
  }
  while ( size - 1u != x )
  {
    size = ( size - 1u ) >> 1;
    --seq;
    x = x % size;
  }
  return std::pow( y, static_cast<double>( seq ) );
}

/* max-heap of variables keyed by activity, lower index first on ties */
class var_heap
{
public:
  explicit var_heap( std::vector<double> const& act ) : act_( act ), pos_( act.size(), -1 ) {}

  bool empty() const { return heap_.empty(); }
  bool contains( std::uint32_t v ) const { return pos_[v] >= 0; }

  void insert( std::uint32_t v )
  {
    if ( contains( v ) )
    {
      return;
    }
    pos_[v] = static_cast<int>( heap_.size() );
    heap_.push_back( v );
    up( heap_.size() - 1u );
  }

  void increased( std::uint32_t v )
  {
    if ( contains( v ) )
    {
      up( static_cast<std::size_t>( pos_[v] ) );
    }
  }

  std::uint32_t pop()
  {
    auto const top = heap_.front();
    heap_.front() = heap_.back();
    pos_[heap_.front()] = 0;
    heap_.pop_back();
    pos_[top] = -1;
    if ( !heap_.empty() )
    {
      down( 0u );
    }
    return top;
  }

private:
  bool before( std::uint32_t a, std::uint32_t b ) const { return act_[a] > act_[b] || ( act_[a] == act_[b] && a < b ); }

  void place( std::size_t i, std::uint32_t v )
  {
    heap_[i] = v;
    pos_[v] = static_cast<int>( i );
  }

  void up( std::size_t i )
  {
    auto const v = heap_[i];
    while ( i > 0u && before( v, heap_[( i - 1u ) / 2u] ) )
    {
      place( i, heap_[( i - 1u ) / 2u] );
      i = ( i - 1u ) / 2u;
    }
    place( i, v );
  }

  void down( std::size_t i )
  {
    auto const v = heap_[i];
    for ( ;; )
    {
      auto child = 2u * i + 1u;
      if ( child >= heap_.size() )
      {
        break;
      }
      if ( child + 1u < heap_.size() && before( heap_[child + 1u], heap_[child] ) )
      {
        ++child;
      }
      if ( !before( heap_[child], v ) )
      {
        break;
      }
      place( i, heap_[child] );
      i = child;
    }
    place( i, v );
  }

  std::vector<double> const& act_;
  std::vector<std::uint32_t> heap_;
  std::vector<int> pos_;
};

class cdcl
{
public:
  cdcl( cnf const& f, similarity_index const* index, solver_options const& options )
      : n_( f.num_vars ), index_( index ), opt_( options ), assign_( n_, -1 ), level_( n_, 0 ), reason_( n_, no_reason ),
        phase_( n_, options.initial_phase ), activity_( n_, 0.0 ), seen_( n_, 0 ), watches_( 2u * n_ ), heap_( activity_ )
  {
    if ( index_ && index_->num_vars() < n_ )
    {
      throw error( errc::shape_mismatch, "similarity index covers fewer variables than the formula" );
    }
    for ( auto const& c : f.clauses )
    {
      add_input( c );
    }
    for ( std::uint32_t v = 0; v < n_; ++v )
    {
      heap_.insert( v );
    }
  }

  solve_result run()
  {
    solve_result r;
    r.status = search( r );
    r.stats = stats_;
    if ( r.status == sat_status::sat )
    {
      r.model.assign( n_ + 1u, false );
      for ( std::uint32_t v = 0; v < n_; ++v )
      {
        r.model[v + 1u] = assign_[v] == 1;
      }
      for ( auto const& c : original_ )
      {
        if ( std::none_of( c.begin(), c.end(), [&]( lit l ) { return value( l ) == 1; } ) )
        {
          throw std::logic_error( "solver produced a model that violates an input clause" );
        }
      }
    }
    return r;
  }

private:
  int value( lit l ) const
  {
    auto const a = assign_[var_of( l )];
    return a < 0 ? -1 : ( a ^ static_cast<int>( negated( l ) ) );
  }

  std::uint32_t decision_level() const { return static_cast<std::uint32_t>( trail_lim_.size() ); }

  void add_input( std::vector<int> const& raw )
  {
    std::vector<lit> c;
    for ( auto x : raw )
    {
      if ( x == 0 || static_cast<std::uint32_t>( std::abs( x ) ) > n_ )
      {
        throw error( errc::malformed_clause, "literal " + std::to_string( x ) + " outside 1.." + std::to_string( n_ ) );
      }
      c.push_back( make_lit( static_cast<std::uint32_t>( std::abs( x ) ) - 1u, x < 0 ) );
    }
    std::sort( c.begin(), c.end() );
    c.erase( std::unique( c.begin(), c.end() ), c.end() );
    for ( std::size_t k = 1; k < c.size(); ++k )
    {
      if ( c[k] == ( c[k - 1] ^ 1u ) )
      {
        return; // tautology
      }
    }
    if ( c.empty() )
    {
      empty_clause_ = true;
      return;
    }
    original_.push_back( c );
    if ( c.size() == 1u )
    {
      units_.push_back( c[0] );
      return;
    }
    attach( std::move( c ) );
  }

  std::uint32_t attach( std::vector<lit> c )
  {
    auto const idx = static_cast<std::uint32_t>( clauses_.size() );
    watches_[c[0]].push_back( idx );
    watches_[c[1]].push_back( idx );
    clauses_.push_back( std::move( c ) );
    return idx;
  }

  void enqueue( lit l, std::uint32_t reason )
  {
    auto const v = var_of( l );
    assign_[v] = negated( l ) ? 0 : 1;
    level_[v] = decision_level();
    reason_[v] = reason;
    trail_.push_back( l );
  }

  void new_decision( lit l )
  {
    trail_lim_.push_back( trail_.size() );
    enqueue( l, no_reason );
    ++stats_.decisions;
  }

  /* returns the index of a falsified clause, or no_reason */
  std::uint32_t propagate()
  {
    while ( qhead_ < trail_.size() )
    {
      auto const p = trail_[qhead_++];
      auto const falsified = p ^ 1u;
      auto& ws = watches_[falsified];
      std::size_t i = 0, j = 0;
      while ( i < ws.size() )
      {
        auto const ci = ws[i++];
        auto& c = clauses_[ci];
        if ( c[0] == falsified )
        {
          std::swap( c[0], c[1] );
        }
        if ( value( c[0] ) == 1 )
        {
          ws[j++] = ci;
          continue;
        }
        bool moved = false;
        for ( std::size_t k = 2; k < c.size(); ++k )
        {
          if ( value( c[k] ) != 0 )
          {
            std::swap( c[1], c[k] );
            watches_[c[1]].push_back( ci );
            moved = true;
            break;
          }
        }
        if ( moved )
        {
          continue;
        }
        ws[j++] = ci;
        if ( value( c[0] ) == 0 )
        {
          while ( i < ws.size() )
          {
            ws[j++] = ws[i++];
          }
          ws.resize( j );
          qhead_ = trail_.size();
          return ci;
        }
        enqueue( c[0], ci );
        ++stats_.propagations;
      }
      ws.resize( j );
    }
    return no_reason;
  }

  void bump( std::uint32_t v )
  {
    activity_[v] += var_inc_;
    if ( activity_[v] > 1e100 )
    {
      for ( auto& a : activity_ )
      {
        a *= 1e-100;
      }
      var_inc_ *= 1e-100;
    }
    heap_.increased( v );
  }

  /* first-UIP learning; returns the clause (asserting literal first) and the backjump level */
  std::pair<std::vector<lit>, std::uint32_t> analyze( std::uint32_t confl )
  {
    std::vector<lit> learnt{ 0u };
    std::size_t path = 0;
    lit p = 0;
    bool have_p = false;
    auto idx = trail_.size();
    do
    {
      auto const& c = clauses_[confl];
      for ( std::size_t k = have_p ? 1u : 0u; k < c.size(); ++k )
      {
        auto const q = c[k];
        auto const v = var_of( q );
        if ( !seen_[v] && level_[v] > 0u )
        {
          seen_[v] = 1;
          bump( v );
          if ( level_[v] >= decision_level() )
          {
            ++path;
          }
          else
          {
            learnt.push_back( q );
          }
        }
      }
      while ( !seen_[var_of( trail_[--idx] )] )
      {
      }
      p = trail_[idx];
      have_p = true;
      confl = reason_[var_of( p )];
      seen_[var_of( p )] = 0;
      --path;
    } while ( path > 0u );
    learnt[0] = p ^ 1u;

    std::uint32_t back = 0;
    std::size_t max_k = 1;
    for ( std::size_t k = 1; k < learnt.size(); ++k )
    {
      seen_[var_of( learnt[k] )] = 0;
      if ( level_[var_of( learnt[k] )] > back )
      {
        back = level_[var_of( learnt[k] )];
        max_k = k;
      }
    }
    if ( learnt.size() > 1u )
    {
      std::swap( learnt[1], learnt[max_k] );
    }
    return { std::move( learnt ), back };
  }

  void backtrack( std::uint32_t level )
  {
    if ( decision_level() <= level )
    {
      return;
    }
    for ( auto k = trail_.size(); k > trail_lim_[level]; --k )
    {
      auto const v = var_of( trail_[k - 1u] );
      phase_[v] = assign_[v] == 1;
      assign_[v] = -1;
      reason_[v] = no_reason;
      heap_.insert( v );
    }
    trail_.resize( trail_lim_[level] );
    trail_lim_.resize( level );
    qhead_ = trail_.size();
  }

  sat_status search( solve_result& r )
  {
    if ( empty_clause_ )
    {
      return sat_status::unsat;
    }
    for ( auto l : units_ )
    {
      if ( value( l ) == 0 )
      {
        return sat_status::unsat;
      }
      if ( value( l ) < 0 )
      {
        enqueue( l, no_reason );
      }
    }
    std::vector<std::uint32_t> hook_queue;
    std::size_t hook_pos = 0;
    bool hook_value = false;
    std::uint64_t since_restart = 0;
    auto restart_limit = opt_.restart_unit * luby( 2.0, 0 );

    for ( ;; )
    {
      auto const confl = propagate();
      if ( confl != no_reason )
      {
        ++stats_.conflicts;
        ++since_restart;
        if ( decision_level() == 0u )
        {
          return sat_status::unsat;
        }
        auto [learnt, back] = analyze( confl );
        backtrack( back );
        hook_queue.clear();
        hook_pos = 0;
        ++stats_.learned;
        if ( opt_.record_learned )
        {
          std::vector<int> out;
          for ( auto l : learnt )
          {
            out.push_back( to_dimacs( l ) );
          }
          r.learned.push_back( std::move( out ) );
        }
        if ( learnt.size() == 1u )
        {
          enqueue( learnt[0], no_reason );
        }
        else
        {
          auto const first = learnt[0];
          enqueue( first, attach( std::move( learnt ) ) );
        }
        var_inc_ /= 0.95;
        if ( opt_.max_conflicts > 0u && stats_.conflicts >= opt_.max_conflicts )
        {
          return sat_status::unknown;
        }
        if ( static_cast<double>( since_restart ) >= restart_limit )
        {
          ++stats_.restarts;
          since_restart = 0;
          restart_limit = opt_.restart_unit * luby( 2.0, stats_.restarts );
          backtrack( 0 );
        }
        continue;
      }

      // pending joint decisions from the last heap decision, one level each
      bool hooked = false;
      while ( hook_pos < hook_queue.size() )
      {
        auto const v = hook_queue[hook_pos++] - 1u;
        if ( v < n_ && assign_[v] < 0 )
        {
          new_decision( make_lit( v, hook_value ) ); // opposite of the heap decision
          ++stats_.hook_assignments;
          hooked = true;
          break;
        }
      }
      if ( hooked )
      {
        continue;
      }

      std::uint32_t next = n_;
      while ( !heap_.empty() )
      {
        auto const v = heap_.pop();
        if ( assign_[v] < 0 )
        {
          next = v;
          break;
        }
      }
      if ( next == n_ )
      {
        return sat_status::sat;
      }
      new_decision( make_lit( next, !phase_[next] ) );
      if ( index_ )
      {
        hook_queue = index_->neighbors( next + 1u );
        hook_pos = 0;
        hook_value = phase_[next];
      }
    }
  }

  std::uint32_t n_;
  similarity_index const* index_;
  solver_options opt_;
  std::vector<int> assign_; // -1 unassigned, else 0/1
  std::vector<std::uint32_t> level_;
  std::vector<std::uint32_t> reason_;
  std::vector<bool> phase_;
  std::vector<double> activity_;
  std::vector<char> seen_;
  std::vector<std::vector<std::uint32_t>> watches_;
  var_heap heap_;
  double var_inc_{ 1.0 };
  std::vector<std::vector<lit>> clauses_;
  std::vector<std::vector<lit>> original_;
  std::vector<lit> units_;
  bool empty_clause_{ false };
  std::vector<lit> trail_;
  std::vector<std::size_t> trail_lim_;
  std::size_t qhead_{ 0 };
  solver_stats stats_;
};

} // namespace

solve_result solve( cnf const& f, similarity_index const* index, solver_options const& options )
{
  cdcl s( f, index, options );
  return s.run();
}

std::string stats_json( solve_result const& r )
{
  nlohmann::ordered_json j;
  j["status"] = std::string( to_string( r.status ) );
  j["decisions"] = r.stats.decisions;
  j["conflicts"] = r.stats.conflicts;
  j["propagations"] = r.stats.propagations;
  j["restarts"] = r.stats.restarts;
  j["hook_assignments"] = r.stats.hook_assignments;
  j["learned"] = r.stats.learned;
  return j.dump( 2 ) + "\n";
}

} // namespace gatekit
