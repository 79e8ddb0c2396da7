#include "cli.hpp"

#include "gatekit/error.hpp"
#include "gatekit/generate.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace gatekit;
namespace fs = std::filesystem;

namespace
{

class Cli : public ::testing::Test
{
protected:
  void SetUp() override
  {
    dir_ = fs::temp_directory_path() / ( "gatekit_cli_" + std::string( ::testing::UnitTest::GetInstance()->current_test_info()->name() ) );
    fs::remove_all( dir_ );
    fs::create_directories( dir_ );
  }
  void TearDown() override { fs::remove_all( dir_ ); }

  std::string path( std::string const& name ) const { return ( dir_ / name ).string(); }

  std::string write( std::string const& name, std::string const& text ) const
  {
    std::ofstream( path( name ), std::ios::binary ) << text;
    return path( name );
  }

  static std::string read( std::string const& p )
  {
    std::ifstream in( p, std::ios::binary );
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  }

  int run( std::vector<std::string> const& args )
  {
    out_.str( "" );
    err_.str( "" );
    return cli::run( args, out_, err_ );
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

std::string const small_training = "patterns=256\ndim=8\nepochs_stage1=1\nepochs_stage2=1\nbatch=4\nlr=0.0005\n";

} // namespace

TEST( RunConfig, RoundTripsThroughResolvedText )
{
  cli::run_config c;
  cli::apply_config_text( c, "seed=7\nlr=0.00025 # comment\n\n  delta = 0.001\npie_enabled=false\nmax_sat_calls=12\n" );
  EXPECT_EQ( c.seed, 7u );
  EXPECT_DOUBLE_EQ( c.lr, 0.00025 );
  EXPECT_FALSE( c.pie_enabled );
  cli::run_config d;
  cli::apply_config_text( d, cli::resolved_config( c ) );
  EXPECT_EQ( cli::resolved_config( d ), cli::resolved_config( c ) );
  EXPECT_EQ( d.lr, c.lr );
  EXPECT_EQ( d.delta, c.delta );
  EXPECT_EQ( d.max_sat_calls, 12u );
}

TEST( RunConfig, RejectsUnknownKeysAndBadValues )
{
  for ( std::string text : { "sede=1", "lr=abc", "batch=-1", "pie_enabled=maybe", "lr=0", "delta=3", "novalue" } )
  {
    cli::run_config c;
    try
    {
      cli::apply_config_text( c, text );
      FAIL() << text;
    }
    catch ( error const& e )
    {
      EXPECT_EQ( e.code(), errc::bad_config ) << text;
    }
  }
}

TEST( RunConfig, MapsOntoModuleConfigs )
{
  cli::run_config c;
  cli::apply_config_text( c, "seed=3\ndim=16\nlr=0.001\nweight_decay=0.5\nbatch=8\nmultistage_enabled=false\nw_rc=2\nconflict_budget=99" );
  EXPECT_EQ( c.model().dim, 16u );
  EXPECT_EQ( c.model().seed, 3u );
  EXPECT_EQ( c.train().optimizer.lr, 0.001 );
  EXPECT_EQ( c.train().optimizer.weight_decay, 0.5 );
  EXPECT_EQ( c.train().batch_size, 8u );
  EXPECT_FALSE( c.train().multistage );
  EXPECT_EQ( c.train().w_rc, 2.0 );
  EXPECT_EQ( c.sweep().conflict_budget, 99u );
  EXPECT_EQ( c.dataset().seed, 3u );
}

TEST_F( Cli, UsageErrors )
{
  EXPECT_EQ( run( {} ), 1 );
  EXPECT_EQ( run( { "frobnicate" } ), 1 );
  EXPECT_EQ( run( { "solve" } ), 1 );
  EXPECT_NE( err_.str().find( "--model" ), std::string::npos ) << "subcommand help expected";
  auto const f = write( "f.cnf", "p cnf 1 1\n1 0\n" );
  EXPECT_EQ( run( { "--set", "bogus=1", "solve", f } ), 1 );
  EXPECT_NE( err_.str().find( "bogus" ), std::string::npos );
  EXPECT_EQ( run( { "solve", path( "missing.cnf" ) } ), 1 );
  EXPECT_EQ( run( { "dataset", "-o", path( "d.json" ) } ), 1 );
  EXPECT_EQ( run( { "solve", "--help" } ), 0 );
}

TEST_F( Cli, SolveExitCodes )
{
  EXPECT_EQ( run( { "solve", write( "unsat.cnf", "p cnf 1 2\n1 0\n-1 0\n" ) } ), 20 );
  EXPECT_NE( out_.str().find( "s UNSATISFIABLE" ), std::string::npos );
  EXPECT_NE( out_.str().find( "c seed=0" ), std::string::npos );
  EXPECT_EQ( run( { "solve", write( "sat.cnf", "c x\np cnf 2 2\n1 2 0\n-1 0\n" ), "-o", path( "stats.json" ) } ), 10 );
  auto const j = nlohmann::json::parse( read( path( "stats.json" ) ) );
  EXPECT_TRUE( j.contains( "conflicts" ) );
  EXPECT_TRUE( fs::exists( path( "stats.json.config" ) ) );
  EXPECT_EQ( run( { "solve", write( "bad.cnf", "p cnf 1 1\n2 0\n" ) } ), 2 );
  EXPECT_NE( err_.str().find( "MalformedClause" ), std::string::npos );

  // pigeonhole 6 into 5 with a tiny conflict budget: unknown
  std::ostringstream php;
  php << "p cnf 30 " << 6 + 5 * 15 << "\n";
  for ( int p = 0; p < 6; ++p )
  {
    for ( int h = 0; h < 5; ++h )
    {
      php << p * 5 + h + 1 << " ";
    }
    php << "0\n";
  }
  for ( int h = 0; h < 5; ++h )
  {
    for ( int p = 0; p < 6; ++p )
    {
      for ( int q = p + 1; q < 6; ++q )
      {
        php << -( p * 5 + h + 1 ) << " " << -( q * 5 + h + 1 ) << " 0\n";
      }
    }
  }
  EXPECT_EQ( run( { "--set", "max_conflicts=3", "solve", write( "php.cnf", php.str() ) } ), 0 );
  EXPECT_NE( out_.str().find( "s UNKNOWN" ), std::string::npos );
}

TEST_F( Cli, SolveCircuit )
{
  // x & !x is never true; x & y is
  auto const contradiction = write( "c.aag", "aag 2 1 0 1 1\n2\n4\n4 2 3\n" );
  EXPECT_EQ( run( { "solve", contradiction } ), 20 );
  auto const both = write( "b.aag", "aag 3 2 0 1 1\n2\n4\n6\n6 2 4\n" );
  EXPECT_EQ( run( { "solve", both } ), 10 );
}

TEST_F( Cli, SimWritesProbabilities )
{
  random_aig_config rc;
  rc.num_pis = 5;
  rc.max_gates = 20;
  auto const g = canonicalize( random_aig( rc ) );
  write_aiger( g, path( "g.aag" ) );
  ASSERT_EQ( run( { "--set", "patterns=64", "sim", path( "g.aag" ), "-o", path( "p.csv" ) } ), 0 ) << err_.str();
  std::istringstream csv( read( path( "p.csv" ) ) );
  std::string line;
  std::getline( csv, line );
  EXPECT_EQ( line, "node,kind,level,prob" );
  std::size_t rows = 0u;
  while ( std::getline( csv, line ) )
  {
    auto const n = static_cast<node_index>( std::stoul( line.substr( 0, line.find( ',' ) ) ) );
    auto const prob = std::stod( line.substr( line.rfind( ',' ) + 1u ) );
    auto const tt = oracle::truth_table( g, n ); // 5 PIs and 64 patterns: exhaustive
    EXPECT_DOUBLE_EQ( prob, static_cast<double>( std::count( tt.begin(), tt.end(), true ) ) / static_cast<double>( tt.size() ) );
    ++rows;
  }
  EXPECT_EQ( rows, g.size() );
  EXPECT_NE( read( path( "p.csv.config" ) ).find( "patterns=64\n" ), std::string::npos );
}

TEST_F( Cli, SweepMergesKnownDuplicates )
{
  random_aig_config rc;
  rc.num_pis = 8;
  rc.max_gates = 50;
  rc.redundancy = 0.0;
  rc.seed = 11;
  auto const d = inject_duplicate_cones( random_aig( rc ), 4u, 11u );
  write_aiger( d.graph, path( "dup.aag" ) );

  // oracle: every node whose truth table repeats one of a lower node is a duplicate
  auto const g = read_aiger( path( "dup.aag" ) );
  std::map<std::vector<bool>, int> seen;
  std::size_t duplicates = 0u;
  for ( node_index n = 0; n < g.size(); ++n )
  {
    duplicates += seen[oracle::truth_table( g, n )]++ > 0 ? 1u : 0u;
  }
  ASSERT_GT( duplicates, 0u );

  for ( std::vector<std::string> extra : { std::vector<std::string>{}, std::vector<std::string>{ "--baseline-order" } } )
  {
    std::vector<std::string> args{ "sweep", path( "dup.aag" ), "-o", path( "out.aag" ) };
    args.insert( args.end(), extra.begin(), extra.end() );
    ASSERT_EQ( run( args ), 0 ) << err_.str();
    auto const stats = nlohmann::json::parse( read( path( "out.aag.stats.json" ) ) );
    EXPECT_EQ( stats["merges"].get<std::size_t>(), duplicates );
    EXPECT_EQ( stats["ands_after"].get<std::size_t>(), d.reference_ands );
    auto const reduced = read_aiger( path( "out.aag" ) );
    EXPECT_EQ( reduced.num_ands(), d.reference_ands );
    EXPECT_TRUE( outputs_equivalent( g, reduced ) );
  }
}

TEST_F( Cli, PipelineIsReproducible )
{
  auto const cfg = write( "run.cfg", small_training );
  ASSERT_EQ( run( { "--config", cfg, "dataset", "--synthetic", "6", "--pis", "5", "--gates", "25", "-o", path( "d.json" ) } ), 0 ) << err_.str();
  ASSERT_EQ( run( { "--config", cfg, "train", path( "d.json" ), "-o", path( "m1.json" ) } ), 0 ) << err_.str();
  ASSERT_EQ( run( { "--config", cfg, "train", path( "d.json" ), "-o", path( "m2.json" ) } ), 0 ) << err_.str();
  EXPECT_EQ( read( path( "m1.json.metrics.csv" ) ), read( path( "m2.json.metrics.csv" ) ) );
  EXPECT_EQ( read( path( "m1.json" ) ), read( path( "m2.json" ) ) );
  EXPECT_EQ( read( path( "m1.json.metrics.csv" ) ).substr( 0, 30 ), "epoch,stage,L_prob,L_rc,L_func" );

  // the emitted config alone reproduces the run
  ASSERT_EQ( run( { "--config", path( "m1.json.config" ), "train", path( "d.json" ), "-o", path( "m3.json" ) } ), 0 );
  EXPECT_EQ( read( path( "m1.json" ) ), read( path( "m3.json" ) ) );

  ASSERT_EQ( run( { "eval", path( "m1.json" ), path( "d.json" ), "-o", path( "r.json" ) } ), 0 ) << err_.str();
  auto const report = nlohmann::json::parse( read( path( "r.json" ) ) );
  EXPECT_TRUE( report.contains( "pe" ) );
  EXPECT_TRUE( report.contains( "f1" ) );

  // model-ranked sweep and hooked solve accept the checkpoint
  random_aig_config rc;
  rc.num_pis = 6;
  rc.max_gates = 30;
  write_aiger( random_aig( rc ), path( "g.aag" ) );
  EXPECT_EQ( run( { "sweep", path( "g.aag" ), "--model", path( "m1.json" ), "-o", path( "s.aag" ) } ), 0 ) << err_.str();
  auto const code = run( { "solve", path( "g.aag" ), "--model", path( "m1.json" ), "--delta", "0.05" } );
  EXPECT_TRUE( code == 10 || code == 20 ) << err_.str();
  EXPECT_EQ( run( { "solve", write( "f.cnf", "p cnf 1 1\n1 0\n" ), "--model", path( "m1.json" ) } ), 1 );
  EXPECT_EQ( run( { "sweep", path( "g.aag" ), "--model", path( "m1.json" ), "--baseline-order", "-o", path( "s.aag" ) } ), 1 );
}

TEST_F( Cli, DatasetFromDirectory )
{
  fs::create_directories( path( "circuits" ) );
  for ( std::uint64_t s = 0; s < 3; ++s )
  {
    random_aig_config rc;
    rc.num_pis = 5;
    rc.max_gates = 25;
    rc.seed = s;
    write_aiger( random_aig( rc ), path( "circuits/c" + std::to_string( s ) + ".aag" ) );
  }
  ASSERT_EQ( run( { "--set", "patterns=64", "dataset", path( "circuits" ), "-o", path( "d.json" ) } ), 0 ) << err_.str();
  EXPECT_EQ( read_dataset( path( "d.json" ) ).size(), 3u );
  fs::create_directories( path( "empty" ) );
  EXPECT_EQ( run( { "dataset", path( "empty" ), "-o", path( "e.json" ) } ), 2 );
}
