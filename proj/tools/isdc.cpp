/*!
  \file isdc.cpp
  \brief Command-line front end: schedule, iterate, generate benchmarks, and
         serve the oracle wire protocol as a subprocess.

  Exit codes: 0 ok, 1 parse error, 2 infeasible schedule, 3 oracle spawn
  failure, 4 oracle protocol error (oracle-sim).
*/

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include <isdc/delay_matrix.hpp>
#include <isdc/engine.hpp>
#include <isdc/graph.hpp>
#include <isdc/oracle.hpp>
#include <isdc/report.hpp>
#include <isdc/sdc.hpp>

namespace
{

constexpr int kExitOk = 0;
constexpr int kExitParse = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitOracleSpawn = 3;
constexpr int kExitProtocol = 4;

bool log_enabled()
{
  char const* v = std::getenv( "ISDC_LOG" );
  return v != nullptr && std::string( v ) != "" && std::string( v ) != "off";
}

std::string read_file( std::string const& path )
{
  std::ifstream in( path, std::ios::binary );
  if ( !in )
    throw isdc::parse_error( "cannot open file: " + path );
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file( std::string const& path, std::string const& content )
{
  std::ofstream out( path, std::ios::binary );
  if ( !out )
    throw std::runtime_error( "cannot write file: " + path );
  out << content;
}

isdc::graph load_graph( std::string const& path, std::int64_t clock_override )
{
  isdc::graph g = isdc::parse_graph( read_file( path ) );
  if ( clock_override > 0 )
    return isdc::graph( g.name(), clock_override, g.nodes() );
  return g;
}

std::unique_ptr<isdc::delay_oracle> make_oracle( std::string const& spec, int timeout_s )
{
  auto const colon = spec.find( ':' );
  std::string const kind = spec.substr( 0, colon );
  std::string const arg = colon == std::string::npos ? "" : spec.substr( colon + 1 );
  if ( kind == "scale" )
    return std::make_unique<isdc::scale_oracle>( isdc::scale_oracle::from_string( arg ) );
  if ( kind == "depth" )
    return std::make_unique<isdc::depth_oracle>( isdc::depth_oracle::from_table_json( read_file( arg ) ) );
  if ( kind == "exec" )
    return std::make_unique<isdc::external_oracle>( arg, timeout_s );
  throw isdc::oracle_error( "unknown oracle kind: " + spec + " (expected scale:<factor>, depth:<table-file>, or exec:<command>)" );
}

int cmd_schedule( std::string const& input, std::string out, std::int64_t clock_override, std::string const& dump_matrix )
{
  isdc::graph const g = load_graph( input, clock_override );
  auto [sched, matrix] = isdc::run_sdc( g );
  if ( out.empty() )
    out = input + ".schedule.json";
  write_file( out, isdc::schedule_to_json( g, sched ) );
  if ( !dump_matrix.empty() )
    write_file( dump_matrix, isdc::dump_matrix_csv( matrix, g ) );
  std::cout << "stages=" << sched.num_stages << " register_bits=" << sched.register_bits << "\n";
  return kExitOk;
}

int cmd_isdc( std::string const& input, std::string out, std::string report_csv, std::int64_t clock_override,
              isdc::isdc_config const& cfg, std::string const& oracle_spec, int timeout_s, std::string const& dump_matrix )
{
  isdc::graph const g = load_graph( input, clock_override );
  auto oracle = make_oracle( oracle_spec, timeout_s );
  auto result = isdc::run_isdc( g, cfg, *oracle );

  if ( out.empty() )
    out = input + ".schedule.json";
  if ( report_csv.empty() )
    report_csv = input + ".report.csv";
  std::string report_json = report_csv;
  if ( report_json.size() > 4 && report_json.substr( report_json.size() - 4 ) == ".csv" )
    report_json = report_json.substr( 0, report_json.size() - 4 ) + ".json";
  else
    report_json += ".json";

  write_file( out, isdc::schedule_to_json( g, result.best ) );
  write_file( report_csv, isdc::reports_to_csv( result.reports ) );
  write_file( report_json, isdc::reports_to_json( result.reports ) );
  if ( !dump_matrix.empty() )
  {
    /* re-derive the final matrix for the dump */
    auto [sched, matrix] = isdc::run_sdc( g );
    (void)sched;
    write_file( dump_matrix, isdc::dump_matrix_csv( matrix, g ) );
  }

  if ( log_enabled() )
    for ( auto const& r : result.reports )
      std::cerr << "iteration " << r.iteration << ": register_bits=" << r.register_bits << " num_stages="
                << r.num_stages << " subgraphs=" << r.subgraphs.size()
                << ( r.oracle_failed ? " (oracle failed)" : "" ) << "\n";

  std::cout << "stages=" << result.best.num_stages << " register_bits=" << result.best.register_bits
            << " best_iteration=" << result.best_iteration << "\n";
  return kExitOk;
}

int cmd_generate( std::uint64_t seed, std::size_t layers, std::size_t width, std::int64_t clock, std::string const& out )
{
  isdc::graph const g = isdc::generate_layered_graph( seed, layers, width, clock );
  write_file( out, isdc::serialize_graph( g ) );
  std::cout << "nodes=" << g.size() << "\n";
  return kExitOk;
}

int cmd_oracle_sim( std::string const& scale, std::string const& depth_table )
{
  std::unique_ptr<isdc::delay_oracle> oracle;
  isdc::scale_oracle const* scale_model = nullptr;
  isdc::depth_oracle const* depth_model = nullptr;
  if ( !depth_table.empty() )
  {
    auto d = std::make_unique<isdc::depth_oracle>( isdc::depth_oracle::from_table_json( read_file( depth_table ) ) );
    depth_model = d.get();
    oracle = std::move( d );
  }
  else
  {
    auto s = std::make_unique<isdc::scale_oracle>( isdc::scale_oracle::from_string( scale.empty() ? "1.0" : scale ) );
    scale_model = s.get();
    oracle = std::move( s );
  }

  std::string line;
  while ( std::getline( std::cin, line ) )
  {
    if ( line.find_first_not_of( " \t\r" ) == std::string::npos )
      continue;
    try
    {
      auto const req = isdc::request_from_json( nlohmann::json::parse( line ) );
      std::int64_t const delay = scale_model ? scale_model->delay_for( req ) : depth_model->delay_for( req );
      nlohmann::json resp;
      resp["subgraph_id"] = req.subgraph_id;
      resp["delay_ps"] = delay;
      std::cout << resp.dump() << "\n" << std::flush;
    }
    catch ( std::exception const& e )
    {
      std::cerr << "oracle-sim: malformed request line: " << e.what() << "\n";
      return kExitProtocol;
    }
  }
  return kExitOk;
}

} // namespace

int main( int argc, char** argv )
{
  CLI::App app{ "Feedback-guided iterative pipeline scheduler" };
  app.require_subcommand( 1 );

  std::string input, out, report_csv, dump_matrix;
  std::int64_t clock_override = 0;

  auto* sched_cmd = app.add_subcommand( "schedule", "Schedule a graph once with plain difference-constraint scheduling" );
  sched_cmd->add_option( "input", input, "Graph file (JSON)" )->required();
  sched_cmd->add_option( "-o,--out", out, "Schedule output file (default: <input>.schedule.json)" );
  sched_cmd->add_option( "--clock-period-ps", clock_override, "Override the graph's clock period" );
  sched_cmd->add_option( "--dump-matrix", dump_matrix, "Write the delay matrix as CSV (debug)" );

  isdc::isdc_config cfg;
  std::string strategy = "fanout", shape = "window", oracle_spec = "scale:0.7";
  int timeout_s = 300;
  int parallelism = 0;

  auto* isdc_cmd = app.add_subcommand( "isdc", "Iteratively refine the schedule with oracle feedback" );
  isdc_cmd->add_option( "input", input, "Graph file (JSON)" )->required();
  isdc_cmd->add_option( "-o,--out", out, "Best schedule output file (default: <input>.schedule.json)" );
  isdc_cmd->add_option( "--report", report_csv, "Report CSV path; a .json twin is written next to it (default: <input>.report.csv)" );
  isdc_cmd->add_option( "--clock-period-ps", clock_override, "Override the graph's clock period" );
  isdc_cmd->add_option( "--strategy", strategy, "Candidate ranking: delay | fanout" )
      ->default_val( "fanout" )
      ->check( CLI::IsMember( { "delay", "fanout" } ) );
  isdc_cmd->add_option( "--shape", shape, "Subgraph shape: path | cone | window" )
      ->default_val( "window" )
      ->check( CLI::IsMember( { "path", "cone", "window" } ) );
  isdc_cmd->add_option( "--subgraphs-per-iter", cfg.subgraphs_per_iter, "Subgraphs evaluated per iteration (m)" )
      ->default_val( 16 )
      ->check( CLI::PositiveNumber );
  isdc_cmd->add_option( "--max-iterations", cfg.max_iterations, "Iteration cap" )
      ->default_val( 15 )
      ->check( CLI::PositiveNumber );
  isdc_cmd->add_option( "--stable-iterations", cfg.stable_iterations, "Stop after this many iterations without register change (p)" )
      ->default_val( 3 )
      ->check( CLI::PositiveNumber );
  isdc_cmd->add_option( "--window-node-cap", cfg.window_node_cap, "Skip window merges beyond this node count" )
      ->default_val( 64 )
      ->check( CLI::PositiveNumber );
  isdc_cmd->add_option( "--oracle", oracle_spec, "Delay oracle: scale:<factor> | depth:<table-file> | exec:<command>" )
      ->default_val( "scale:0.7" );
  isdc_cmd->add_option( "--oracle-timeout-s", timeout_s, "Per-batch timeout for exec oracles" )->default_val( 300 );
  isdc_cmd->add_option( "--parallelism", parallelism,
                        "Advisory worker bound for oracle evaluation (default: subgraphs-per-iter); built-in models evaluate deterministically" );
  isdc_cmd->add_option( "--dump-matrix", dump_matrix, "Write the pre-feedback delay matrix as CSV (debug)" );

  std::uint64_t seed = 0;
  std::size_t layers = 1, width = 1;
  std::int64_t gen_clock = 10000;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand( "generate", "Generate a deterministic layered benchmark graph" );
  gen_cmd->add_option( "--seed", seed, "Generator seed" )->default_val( 0 );
  gen_cmd->add_option( "--layers", layers, "Layer count, including the input layer" )->required()->check( CLI::PositiveNumber );
  gen_cmd->add_option( "--width", width, "Nodes per layer" )->required()->check( CLI::PositiveNumber );
  gen_cmd->add_option( "--clock-period-ps", gen_clock, "Clock period stored in the file" )->default_val( 10000 );
  gen_cmd->add_option( "--out", gen_out, "Output graph file" )->required();

  std::string sim_scale, sim_depth;
  auto* sim_cmd = app.add_subcommand( "oracle-sim", "Serve the oracle wire protocol on stdin/stdout" );
  auto* sim_scale_opt = sim_cmd->add_option( "--scale", sim_scale, "Scale model factor" );
  sim_cmd->add_option( "--depth", sim_depth, "Depth model table file" )->excludes( sim_scale_opt );

  CLI11_PARSE( app, argc, argv );

  cfg.strategy_rank = strategy == "delay" ? isdc::rank_strategy::delay_driven : isdc::rank_strategy::fanout_driven;
  cfg.strategy_shape = shape == "path"   ? isdc::subgraph_kind::path
                       : shape == "cone" ? isdc::subgraph_kind::cone
                                         : isdc::subgraph_kind::window;

  try
  {
    if ( sched_cmd->parsed() )
      return cmd_schedule( input, out, clock_override, dump_matrix );
    if ( isdc_cmd->parsed() )
      return cmd_isdc( input, out, report_csv, clock_override, cfg, oracle_spec, timeout_s, dump_matrix );
    if ( gen_cmd->parsed() )
      return cmd_generate( seed, layers, width, gen_clock, gen_out );
    if ( sim_cmd->parsed() )
      return cmd_oracle_sim( sim_scale, sim_depth );
  }
  catch ( isdc::infeasible_error const& e )
  {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  }
  catch ( isdc::oracle_spawn_error const& e )
  {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOracleSpawn;
  }
  catch ( isdc::graph_error const& e )
  {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }
  catch ( std::exception const& e )
  {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }
  return kExitOk;
}
