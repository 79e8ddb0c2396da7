#include "cli.hpp"

#include "gatekit/error.hpp"
#include "gatekit/generate.hpp"
#include "gatekit/random.hpp"
#include "gatekit/sat.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace gatekit::cli
{

namespace
{

template<typename T>
T parse_number( std::string_view key, std::string_view value )
{
  T v{};
  auto const* end = value.data() + value.size();
  auto const [ptr, ec] = std::from_chars( value.data(), end, v );
  if ( ec != std::errc{} || ptr != end )
  {
    throw error( errc::bad_config, "bad value '" + std::string( value ) + "' for " + std::string( key ) );
  }
  return v;
}

bool parse_bool( std::string_view key, std::string_view value )
{
  if ( value == "true" || value == "1" )
  {
    return true;
  }
  if ( value == "false" || value == "0" )
  {
    return false;
  }
  throw error( errc::bad_config, "bad value '" + std::string( value ) + "' for " + std::string( key ) );
}

std::string format_double( double v )
{
  std::ostringstream os;
  os.precision( 17 );
  os << v;
  return os.str();
}

std::string_view trim( std::string_view s )
{
  auto const b = s.find_first_not_of( " \t\r" );
  if ( b == std::string_view::npos )
  {
    return {};
  }
  return s.substr( b, s.find_last_not_of( " \t\r" ) - b + 1u );
}

std::string read_text( std::string const& path )
{
  std::ifstream in( path, std::ios::binary );
  if ( !in )
  {
    throw error( errc::io_failure, "cannot open " + path );
  }
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text( std::string const& path, std::string const& text )
{
  std::ofstream out( path, std::ios::binary );
  if ( !out || !( out << text ) )
  {
    throw error( errc::io_failure, "cannot write " + path );
  }
}

/* all POs folded into one OR node, so a circuit formula asks for any true output */
std::pair<aig, node_index> with_output_or( aig const& g )
{
  if ( g.num_pos() == 0u )
  {
    throw error( errc::unknown_node, "circuit has no outputs" );
  }
  if ( g.num_pos() == 1u )
  {
    return { g, g.pos()[0] };
  }
  aig_builder b;
  std::vector<node_index> map( g.size() );
  for ( node_index n = 0; n < g.size(); ++n )
  {
    auto const fi = g.fanins( n );
    switch ( g.kind( n ) )
    {
    case gate_kind::pi: map[n] = b.add_pi(); break;
    case gate_kind::not_gate: map[n] = b.add_not( map[fi[0]] ); break;
    case gate_kind::and_gate: map[n] = b.add_and( map[fi[0]], map[fi[1]] ); break;
    }
  }
  auto acc = b.add_not( map[g.pos()[0]] );
  for ( std::size_t k = 1; k < g.num_pos(); ++k )
  {
    acc = b.add_and( acc, b.add_not( map[g.pos()[k]] ) );
  }
  auto const root = b.add_not( acc );
  b.add_po( root );
  return { std::move( b ).build(), root };
}

bool looks_like_aiger( std::string const& text ) { return text.rfind( "aag", 0 ) == 0u; }

model load_model( std::string const& path ) { return model_from_checkpoint( grad::read_checkpoint( path ) ); }

} // namespace

void run_config::set( std::string_view key, std::string_view value )
{
  using setter = std::function<void( run_config&, std::string_view )>;
  auto size = []( std::size_t run_config::*f ) {
    return setter( [f]( run_config& c, std::string_view v ) { c.*f = parse_number<std::size_t>( "", v ); } );
  };
  auto u64 = []( std::uint64_t run_config::*f ) {
    return setter( [f]( run_config& c, std::string_view v ) { c.*f = parse_number<std::uint64_t>( "", v ); } );
  };
  auto real = []( double run_config::*f ) { return setter( [f]( run_config& c, std::string_view v ) { c.*f = parse_number<double>( "", v ); } ); };
  auto flag = []( bool run_config::*f ) { return setter( [f]( run_config& c, std::string_view v ) { c.*f = parse_bool( "", v ); } ); };
  static std::map<std::string, setter, std::less<>> const table = {
      { "seed", u64( &run_config::seed ) },
      { "patterns", size( &run_config::patterns ) },
      { "dim", size( &run_config::dim ) },
      { "lr", real( &run_config::lr ) },
      { "weight_decay", real( &run_config::weight_decay ) },
      { "batch", size( &run_config::batch ) },
      { "epochs_stage1", size( &run_config::epochs_stage1 ) },
      { "epochs_stage2", size( &run_config::epochs_stage2 ) },
      { "w_prob", real( &run_config::w_prob ) },
      { "w_rc", real( &run_config::w_rc ) },
      { "w_func", real( &run_config::w_func ) },
      { "delta", real( &run_config::delta ) },
      { "pie_enabled", flag( &run_config::pie_enabled ) },
      { "multistage_enabled", flag( &run_config::multistage_enabled ) },
      { "conflict_budget", u64( &run_config::conflict_budget ) },
      { "max_sat_calls", size( &run_config::max_sat_calls ) },
      { "max_conflicts", u64( &run_config::max_conflicts ) } };
  auto const it = table.find( key );
  if ( it == table.end() )
  {
    throw error( errc::bad_config, "unknown key " + std::string( key ) );
  }
  try
  {
    it->second( *this, value );
  }
  catch ( error const& )
  {
    throw error( errc::bad_config, "bad value '" + std::string( value ) + "' for " + std::string( key ) );
  }
  if ( patterns == 0u || dim == 0u || batch == 0u || !( lr > 0.0 ) || weight_decay < 0.0 || w_prob < 0.0 || w_rc < 0.0 || w_func < 0.0 ||
       !( delta >= 0.0 && delta <= 2.0 ) )
  {
    throw error( errc::bad_config, "value '" + std::string( value ) + "' out of range for " + std::string( key ) );
  }
}

dataset_config run_config::dataset() const
{
  dataset_config d;
  d.sim = sim();
  d.seed = seed;
  return d;
}

model_config run_config::model() const
{
  model_config m;
  m.dim = dim;
  m.seed = seed;
  m.pie_enabled = pie_enabled;
  return m;
}

train_config run_config::train() const
{
  train_config t;
  t.epochs_stage1 = epochs_stage1;
  t.epochs_stage2 = epochs_stage2;
  t.batch_size = batch;
  t.w_prob = w_prob;
  t.w_rc = w_rc;
  t.w_func = w_func;
  t.multistage = multistage_enabled;
  t.seed = seed;
  t.optimizer.lr = lr;
  t.optimizer.weight_decay = weight_decay;
  return t;
}

sweep_config run_config::sweep() const
{
  sweep_config s;
  s.sim = sim_config{ 64u, seed };
  s.conflict_budget = conflict_budget;
  s.max_sat_calls = max_sat_calls;
  return s;
}

void apply_config_text( run_config& c, std::string_view text )
{
  std::size_t line_no = 0u;
  while ( !text.empty() )
  {
    auto const eol = text.find( '\n' );
    auto line = text.substr( 0, eol );
    text = eol == std::string_view::npos ? std::string_view{} : text.substr( eol + 1u );
    ++line_no;
    line = trim( line.substr( 0, line.find( '#' ) ) );
    if ( line.empty() )
    {
      continue;
    }
    auto const eq = line.find( '=' );
    if ( eq == std::string_view::npos )
    {
      throw error( errc::bad_config, "line " + std::to_string( line_no ) + ": expected key=value" );
    }
    c.set( trim( line.substr( 0, eq ) ), trim( line.substr( eq + 1u ) ) );
  }
}

std::string resolved_config( run_config const& c )
{
  std::ostringstream os;
  os << "seed=" << c.seed << "\n"
     << "patterns=" << c.patterns << "\n"
     << "dim=" << c.dim << "\n"
     << "lr=" << format_double( c.lr ) << "\n"
     << "weight_decay=" << format_double( c.weight_decay ) << "\n"
     << "batch=" << c.batch << "\n"
     << "epochs_stage1=" << c.epochs_stage1 << "\n"
     << "epochs_stage2=" << c.epochs_stage2 << "\n"
     << "w_prob=" << format_double( c.w_prob ) << "\n"
     << "w_rc=" << format_double( c.w_rc ) << "\n"
     << "w_func=" << format_double( c.w_func ) << "\n"
     << "delta=" << format_double( c.delta ) << "\n"
     << "pie_enabled=" << ( c.pie_enabled ? "true" : "false" ) << "\n"
     << "multistage_enabled=" << ( c.multistage_enabled ? "true" : "false" ) << "\n"
     << "conflict_budget=" << c.conflict_budget << "\n"
     << "max_sat_calls=" << c.max_sat_calls << "\n"
     << "max_conflicts=" << c.max_conflicts << "\n";
  return os.str();
}

int run( std::vector<std::string> const& args, std::ostream& out, std::ostream& err )
{
  CLI::App app{ "gatekit: gate embeddings for SAT sweeping and solving", "gatekit" };
  app.require_subcommand( 1 );

  std::string config_path;
  std::vector<std::string> overrides;
  unsigned threads = 1u;
  app.add_option( "--config", config_path, "Run configuration file (key=value lines)" )->check( CLI::ExistingFile );
  app.add_option( "--set", overrides, "Override one configuration key (key=value)" );
  app.add_option( "--threads", threads, "Simulation threads" )->check( CLI::PositiveNumber );

  std::string input, input2, output, stats_path, model_path, validation_path, metrics_path;
  std::size_t synthetic = 0u, num_pis = 8u, max_gates = 60u;
  bool baseline = false;
  std::optional<double> delta_flag;

  auto* sim = app.add_subcommand( "sim", "Per-node logic probabilities of an AIGER circuit as CSV" );
  sim->add_option( "aiger", input, "Circuit (aag)" )->required()->check( CLI::ExistingFile );
  sim->add_option( "-o,--output", output, "CSV path" )->required();

  auto* dataset = app.add_subcommand( "dataset", "Build a dataset file from AIGER circuits" );
  dataset->add_option( "dir", input, "Directory of .aag files" )->check( CLI::ExistingDirectory );
  dataset->add_option( "--synthetic", synthetic, "Generate this many random circuits instead of reading a directory" );
  dataset->add_option( "--pis", num_pis, "PIs per synthetic circuit" )->check( CLI::PositiveNumber );
  dataset->add_option( "--gates", max_gates, "Gate bound per synthetic circuit" )->check( CLI::PositiveNumber );
  dataset->add_option( "-o,--output", output, "Dataset path" )->required();

  auto* train = app.add_subcommand( "train", "Train a model; writes a checkpoint and a metrics CSV" );
  train->add_option( "dataset", input, "Training dataset" )->required()->check( CLI::ExistingFile );
  train->add_option( "--validation", validation_path, "Validation dataset for per-epoch metrics" )->check( CLI::ExistingFile );
  train->add_option( "-o,--output", output, "Checkpoint path" )->required();
  train->add_option( "--metrics", metrics_path, "Metrics CSV path (default: <output>.metrics.csv)" );

  auto* eval = app.add_subcommand( "eval", "Evaluate a checkpoint on a dataset; writes a JSON report" );
  eval->add_option( "checkpoint", model_path, "Model checkpoint" )->required()->check( CLI::ExistingFile );
  eval->add_option( "dataset", input, "Test dataset" )->required()->check( CLI::ExistingFile );
  eval->add_option( "--validation", validation_path, "Dataset for threshold selection (default: the test set)" )->check( CLI::ExistingFile );
  eval->add_option( "-o,--output", output, "Report path" )->required();

  auto* sweep_cmd = app.add_subcommand( "sweep", "SAT sweeping; writes the reduced AIGER and stats JSON" );
  sweep_cmd->add_option( "aiger", input, "Circuit (aag)" )->required()->check( CLI::ExistingFile );
  auto* model_opt = sweep_cmd->add_option( "--model", model_path, "Checkpoint used to rank candidate pairs" )->check( CLI::ExistingFile );
  sweep_cmd->add_flag( "--baseline-order", baseline, "Rank candidate pairs by node ids" )->excludes( model_opt );
  sweep_cmd->add_option( "-o,--output", output, "Reduced circuit path" )->required();
  sweep_cmd->add_option( "--stats", stats_path, "Stats JSON path (default: <output>.stats.json)" );

  auto* solve_cmd = app.add_subcommand( "solve", "Solve a DIMACS formula or an AIGER circuit (any output true)" );
  solve_cmd->add_option( "input", input, "DIMACS or aag file" )->required()->check( CLI::ExistingFile );
  solve_cmd->add_option( "--model", model_path, "Checkpoint enabling the similarity decision hook (circuits only)" )->check( CLI::ExistingFile );
  solve_cmd->add_option( "--delta", delta_flag, "Similarity margin of the hook; overrides the delta key" );
  solve_cmd->add_option( "-o,--output", output, "Stats JSON path (default: standard output)" );

  auto usage = [&]( std::string const& message ) {
    err << message << "\n";
    auto const chosen = app.get_subcommands();
    err << ( chosen.empty() ? app.help() : chosen.front()->help() );
    return 1;
  };

  try
  {
    std::vector<std::string> reversed( args.rbegin(), args.rend() );
    app.parse( reversed );
  }
  catch ( CLI::CallForHelp const& )
  {
    auto const chosen = app.get_subcommands();
    out << ( chosen.empty() ? app.help() : chosen.front()->help() );
    return 0;
  }
  catch ( CLI::ParseError const& e )
  {
    return usage( e.what() );
  }

  run_config config;
  try
  {
    if ( !config_path.empty() )
    {
      apply_config_text( config, read_text( config_path ) );
    }
    for ( auto const& kv : overrides )
    {
      apply_config_text( config, kv );
    }
    if ( delta_flag )
    {
      if ( !( *delta_flag >= 0.0 && *delta_flag <= 2.0 ) )
      {
        throw error( errc::bad_config, "--delta must lie in [0, 2]" );
      }
      config.delta = *delta_flag;
    }
    if ( *dataset && ( synthetic == 0u ) == input.empty() )
    {
      return usage( "dataset needs exactly one of <dir> and --synthetic" );
    }
  }
  catch ( error const& e )
  {
    return usage( e.what() );
  }

  auto const emit_config = [&]( std::string const& artifact ) { write_text( artifact + ".config", resolved_config( config ) ); };

  try
  {
    if ( *sim )
    {
      auto const g = read_aiger( input );
      auto const sigs = simulate( g, input_patterns( g.num_pis(), config.sim() ), threads );
      std::ostringstream os;
      os << "node,kind,level,prob\n";
      for ( node_index n = 0; n < g.size(); ++n )
      {
        os << n << "," << to_string( g.kind( n ) ) << "," << g.level( n ) << "," << format_double( logic_prob( sigs[n] ) ) << "\n";
      }
      write_text( output, os.str() );
      emit_config( output );
      return 0;
    }
    if ( *dataset )
    {
      std::vector<circuit_record> records;
      if ( synthetic > 0u )
      {
        random_aig_config base;
        base.num_pis = num_pis;
        base.max_gates = max_gates;
        base.seed = config.seed * 1000u;
        records = synthetic_corpus( synthetic, base, config.dataset() );
      }
      else
      {
        std::vector<std::filesystem::path> files;
        for ( auto const& entry : std::filesystem::directory_iterator( input ) )
        {
          if ( entry.is_regular_file() && entry.path().extension() == ".aag" )
          {
            files.push_back( entry.path() );
          }
        }
        std::sort( files.begin(), files.end() );
        if ( files.empty() )
        {
          throw error( errc::empty_corpus, "no .aag files in " + input );
        }
        auto dc = config.dataset();
        for ( std::size_t k = 0; k < files.size(); ++k )
        {
          dc.seed = mix_seed( config.seed, k );
          records.push_back( make_record( read_aiger( files[k].string() ), dc ) );
        }
      }
      write_dataset( records, output );
      emit_config( output );
      out << records.size() << " circuits\n";
      return 0;
    }
    if ( *train )
    {
      auto const records = read_dataset( input );
      std::vector<circuit_record> validation;
      if ( !validation_path.empty() )
      {
        validation = read_dataset( validation_path );
      }
      model m( config.model() );
      auto const result = train_multistage( records, m, config.train(), validation );
      grad::write_checkpoint( result.final_state, output );
      write_text( metrics_path.empty() ? output + ".metrics.csv" : metrics_path, metrics_csv( result.curve ) );
      emit_config( output );
      return 0;
    }
    if ( *eval )
    {
      auto const m = load_model( model_path );
      auto const test = read_dataset( input );
      auto const validation = validation_path.empty() ? test : read_dataset( validation_path );
      write_text( output, report_json( evaluate( m, test, validation ) ) );
      emit_config( output );
      return 0;
    }
    if ( *sweep_cmd )
    {
      auto const g = read_aiger( input );
      std::optional<grad::matrix> hf;
      if ( !model_path.empty() )
      {
        hf = functional_embeddings( load_model( model_path ), g );
      }
      auto const r = sweep( g, hf ? &*hf : nullptr, config.sweep() );
      write_aiger( r.graph, output );
      write_text( stats_path.empty() ? output + ".stats.json" : stats_path, sweep_stats_json( r.stats ) );
      emit_config( output );
      if ( !r.verified )
      {
        err << "reduced circuit failed the output equivalence check\n";
        return 2;
      }
      return 0;
    }
    if ( *solve_cmd )
    {
      auto const text = read_text( input );
      cnf f;
      std::optional<similarity_index> index;
      if ( looks_like_aiger( text ) )
      {
        auto const [g, root] = with_output_or( parse_aiger( text ) );
        f = tseitin( g, root, true );
        if ( !model_path.empty() )
        {
          index = similarity_index::from_embeddings( f, functional_embeddings( load_model( model_path ), g ), config.delta );
        }
      }
      else
      {
        if ( !model_path.empty() )
        {
          return usage( "--model needs a circuit input; DIMACS carries no structure to embed" );
        }
        f = parse_dimacs( text );
      }
      solver_options opt;
      opt.max_conflicts = config.max_conflicts;
      auto const r = solve( f, index ? &*index : nullptr, opt );
      switch ( r.status )
      {
      case sat_status::sat: out << "s SATISFIABLE\n"; break;
      case sat_status::unsat: out << "s UNSATISFIABLE\n"; break;
      case sat_status::unknown: out << "s UNKNOWN\n"; break;
      }
      if ( output.empty() )
      {
        std::istringstream lines( resolved_config( config ) );
        for ( std::string line; std::getline( lines, line ); )
        {
          out << "c " << line << "\n";
        }
        out << stats_json( r );
      }
      else
      {
        write_text( output, stats_json( r ) );
        emit_config( output );
      }
      return r.status == sat_status::sat ? 10 : r.status == sat_status::unsat ? 20 : 0;
    }
  }
  catch ( std::exception const& e )
  {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

} // namespace gatekit::cli
