/*!
  \file engine.hpp
  \brief The iterative scheduling loop: initial difference-constraint
         schedule, then extract -> evaluate -> fold feedback -> propagate ->
         re-solve until the register count stabilizes.
*/

#pragma once

#include <chrono>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "delay_matrix.hpp"
#include "extraction.hpp"
#include "graph.hpp"
#include "oracle.hpp"
#include "sdc.hpp"

namespace isdc
{

struct isdc_config
{
  rank_strategy strategy_rank = rank_strategy::fanout_driven;
  subgraph_kind strategy_shape = subgraph_kind::window;
  int subgraphs_per_iter = 16;   /* m */
  int max_iterations = 15;
  int stable_iterations = 3;     /* p: stop after this many unchanged register counts */
  std::size_t window_node_cap = 64;
};

/*! \brief One evaluated subgraph as recorded in the iteration report. */
struct evaluated_subgraph
{
  int id;
  subgraph_kind kind;
  std::vector<std::string> nodes;
  std::vector<std::string> leaves;
  std::vector<std::string> roots;
  std::int64_t delay_ps;
};

struct iteration_report
{
  int iteration = 0; /* 0 = initial schedule, no subgraphs */
  std::int64_t register_bits = 0;
  std::int64_t num_stages = 0;
  std::int64_t estimated_critical_path_ps = 0; /* max same-stage matrix entry */
  std::vector<evaluated_subgraph> subgraphs;
  std::int64_t wall_time_ms = 0;
  bool oracle_failed = false;
  std::string note;
};

struct isdc_result
{
  schedule best;
  int best_iteration = 0;
  std::vector<iteration_report> reports;
};

/*! \brief Plain SDC scheduling: exact delay matrix, timing constraints,
 *         one solve.
 */
inline std::pair<schedule, delay_matrix> run_sdc( graph const& g )
{
  delay_matrix m = init_matrix( g );
  schedule s = solve( g, build_constraints( g, m, g.clock_period_ps() ) );
  return { std::move( s ), std::move( m ) };
}

namespace detail
{

inline std::int64_t estimated_critical_path( graph const& g, schedule const& s, delay_matrix const& m )
{
  std::int64_t best = 0;
  for ( std::size_t u = 0; u < g.size(); ++u )
    for ( std::size_t v = 0; v < g.size(); ++v )
      if ( s.stages[u] == s.stages[v] && m.at( u, v ) != delay_matrix::unconnected )
        best = std::max( best, m.at( u, v ) );
  return best;
}

/* Shapes ranked candidates into at most `m` subgraphs not evaluated in any
 * prior iteration, promoting lower-ranked candidates past duplicates. */
inline std::vector<subgraph> select_subgraphs( graph const& g, schedule const& s, std::vector<candidate_path> const& ranked,
                                               isdc_config const& cfg, std::set<std::vector<std::string>>& evaluated,
                                               int& next_id )
{
  std::size_t const want = static_cast<std::size_t>( cfg.subgraphs_per_iter );
  auto shape_one = [&]( candidate_path const& c ) {
    return cfg.strategy_shape == subgraph_kind::path ? realize_path( c, g, s ) : expand_to_cone( c, g, s );
  };

  if ( cfg.strategy_shape != subgraph_kind::window )
  {
    std::vector<subgraph> out;
    std::set<std::vector<std::string>> this_iter;
    for ( auto const& c : ranked )
    {
      if ( out.size() == want )
        break;
      subgraph sg = shape_one( c );
      if ( evaluated.count( sg.nodes ) || !this_iter.insert( sg.nodes ).second )
        continue;
      sg.id = next_id++;
      out.push_back( std::move( sg ) );
    }
    return out;
  }

  /* window: expand cones in rank order, merge, then keep the first `want`
   * unseen windows (ordered by their best contributing cone's rank) */
  std::vector<subgraph> cones;
  std::set<std::vector<std::string>> cone_sets;
  for ( auto const& c : ranked )
  {
    subgraph cone = expand_to_cone( c, g, s );
    if ( cone_sets.insert( cone.nodes ).second )
      cones.push_back( std::move( cone ) );
  }

  std::vector<subgraph> merged = merge_to_windows( cones, cfg.window_node_cap );

  /* rank of a window = best rank among the cones it absorbed */
  auto window_rank = [&]( subgraph const& w ) {
    std::set<std::string> roots( w.roots.begin(), w.roots.end() );
    for ( std::size_t r = 0; r < cones.size(); ++r )
      if ( roots.count( cones[r].roots.front() ) )
        return r;
    return cones.size();
  };
  std::stable_sort( merged.begin(), merged.end(),
                    [&]( subgraph const& a, subgraph const& b ) { return window_rank( a ) < window_rank( b ); } );

  std::vector<subgraph> out;
  for ( auto& w : merged )
  {
    if ( out.size() == want )
      break;
    if ( evaluated.count( w.nodes ) )
      continue;
    w.id = next_id++;
    out.push_back( std::move( w ) );
  }
  return out;
}

} // namespace detail

/*! \brief Runs the full iterative loop and returns the best schedule found
 *         together with per-iteration reports.
 *
 * Oracle batch failures skip the iteration (the matrix stays unchanged) but
 * count toward max_iterations. The loop stops early once register_bits is
 * unchanged for `stable_iterations` consecutive iterations or no unevaluated
 * subgraph remains.
 */
inline isdc_result run_isdc( graph const& g, isdc_config const& cfg, delay_oracle& oracle )
{
  using clock = std::chrono::steady_clock;
  auto ms_since = []( clock::time_point t0 ) {
    return std::chrono::duration_cast<std::chrono::milliseconds>( clock::now() - t0 ).count();
  };

  auto t0 = clock::now();
  auto [current, matrix] = run_sdc( g );

  isdc_result result;
  result.best = current;
  result.best_iteration = 0;

  iteration_report initial;
  initial.iteration = 0;
  initial.register_bits = current.register_bits;
  initial.num_stages = current.num_stages;
  initial.estimated_critical_path_ps = detail::estimated_critical_path( g, current, matrix );
  initial.wall_time_ms = ms_since( t0 );
  result.reports.push_back( std::move( initial ) );

  std::set<std::vector<std::string>> evaluated;
  int next_id = 0;
  int stable = 0;
  std::int64_t prev_bits = current.register_bits;

  for ( int iter = 1; iter <= cfg.max_iterations; ++iter )
  {
    t0 = clock::now();
    iteration_report rep;
    rep.iteration = iter;

    auto cands = enumerate_candidates( g, current, matrix );
    auto ranked = rank_and_take( std::move( cands ), cfg.strategy_rank, g.size() );
    auto subgraphs = detail::select_subgraphs( g, current, ranked, cfg, evaluated, next_id );

    if ( subgraphs.empty() )
    {
      rep.register_bits = current.register_bits;
      rep.num_stages = current.num_stages;
      rep.estimated_critical_path_ps = detail::estimated_critical_path( g, current, matrix );
      rep.note = "no unevaluated subgraphs; stopping";
      rep.wall_time_ms = ms_since( t0 );
      result.reports.push_back( std::move( rep ) );
      break;
    }

    std::vector<oracle_request> reqs;
    reqs.reserve( subgraphs.size() );
    for ( auto const& sg : subgraphs )
      reqs.push_back( make_request( sg, g ) );

    std::vector<oracle_response> responses;
    try
    {
      responses = oracle.evaluate_batch( reqs );
    }
    catch ( oracle_spawn_error const& )
    {
      throw;
    }
    catch ( oracle_error const& e )
    {
      rep.oracle_failed = true;
      rep.note = e.what();
      rep.register_bits = current.register_bits;
      rep.num_stages = current.num_stages;
      rep.estimated_critical_path_ps = detail::estimated_critical_path( g, current, matrix );
      rep.wall_time_ms = ms_since( t0 );
      result.reports.push_back( std::move( rep ) );
      continue;
    }

    std::vector<subgraph_feedback> feedback;
    for ( std::size_t i = 0; i < subgraphs.size(); ++i )
    {
      feedback.push_back( { subgraphs[i].nodes, responses[i].delay_ps } );
      evaluated.insert( subgraphs[i].nodes );
      rep.subgraphs.push_back( { subgraphs[i].id, subgraphs[i].kind, subgraphs[i].nodes, subgraphs[i].leaves,
                                 subgraphs[i].roots, responses[i].delay_ps } );
    }

    update_with_feedback( matrix, g, feedback );
    propagate( matrix, g );
    current = solve( g, build_constraints( g, matrix, g.clock_period_ps() ) );

    rep.register_bits = current.register_bits;
    rep.num_stages = current.num_stages;
    rep.estimated_critical_path_ps = detail::estimated_critical_path( g, current, matrix );
    rep.wall_time_ms = ms_since( t0 );
    result.reports.push_back( std::move( rep ) );

    if ( current.register_bits < result.best.register_bits )
    {
      result.best = current;
      result.best_iteration = iter;
    }

    if ( current.register_bits == prev_bits )
      ++stable;
    else
      stable = 0;
    prev_bits = current.register_bits;
    if ( stable >= cfg.stable_iterations )
      break;
  }

  return result;
}

/*! \brief Deterministic layered benchmark generator (desk-scale stand-in
 *         for real HLS datapaths). `layers` counts the input layer: layer 0
 *         holds `width` primary inputs, layers 1..layers-1 hold `width`
 *         operation nodes each, with operands drawn from the previous one
 *         or two layers. Total node count is layers x width.
 */
inline graph generate_layered_graph( std::uint64_t seed, std::size_t layers, std::size_t width,
                                     std::int64_t clock_period_ps = 10000 )
{
  /* splitmix64; self-contained so generated files never depend on library
   * internals of a particular platform */
  std::uint64_t state = seed + 0x9e3779b97f4a7c15ULL;
  auto next = [&state]() {
    std::uint64_t z = ( state += 0x9e3779b97f4a7c15ULL );
    z = ( z ^ ( z >> 30 ) ) * 0xbf58476d1ce4e5b9ULL;
    z = ( z ^ ( z >> 27 ) ) * 0x94d049bb133111ebULL;
    return z ^ ( z >> 31 );
  };
  auto below = [&next]( std::uint64_t k ) { return next() % k; };

  struct op_spec
  {
    char const* name;
    std::int64_t delay_lo, delay_hi;
    int weight;
  };
  constexpr op_spec kOps[] = {
      { "add", 1000, 3000, 3 },
      { "sub", 1000, 3000, 2 },
      { "and", 500, 1500, 2 },
      { "mul", 2000, 6000, 1 },
  };
  constexpr std::int64_t kBits[] = { 8, 16, 32 };

  if ( layers < 1 || width < 1 )
    throw std::invalid_argument( "layers and width must be >= 1" );

  std::vector<node> nodes;
  std::vector<std::vector<std::string>> layer_ids( layers );

  for ( std::size_t i = 0; i < width; ++i )
  {
    node n;
    n.id = "in" + std::to_string( i );
    n.op = "input";
    n.bits = kBits[below( 3 )];
    n.delay_ps = 0;
    layer_ids[0].push_back( n.id );
    nodes.push_back( std::move( n ) );
  }

  for ( std::size_t layer = 1; layer < layers; ++layer )
  {
    for ( std::size_t i = 0; i < width; ++i )
    {
      int total_weight = 0;
      for ( auto const& op : kOps )
        total_weight += op.weight;
      int pick = static_cast<int>( below( static_cast<std::uint64_t>( total_weight ) ) );
      op_spec const* spec = &kOps[0];
      for ( auto const& op : kOps )
      {
        if ( pick < op.weight )
        {
          spec = &op;
          break;
        }
        pick -= op.weight;
      }

      node n;
      n.id = "n" + std::to_string( layer ) + "_" + std::to_string( i );
      n.op = spec->name;
      n.bits = kBits[below( 3 )];
      n.delay_ps = spec->delay_lo + static_cast<std::int64_t>( below(
                       static_cast<std::uint64_t>( spec->delay_hi - spec->delay_lo + 1 ) ) );

      std::size_t const num_operands = 1 + below( 2 );
      for ( std::size_t k = 0; k < num_operands; ++k )
      {
        std::size_t const back = layer >= 2 ? 1 + below( 2 ) : 1;
        auto const& pool = layer_ids[layer - back];
        n.operands.push_back( pool[below( pool.size() )] );
      }
      layer_ids[layer].push_back( n.id );
      nodes.push_back( std::move( n ) );
    }
  }

  std::string name = "layered_s" + std::to_string( seed ) + "_l" + std::to_string( layers ) + "_w" +
                     std::to_string( width );
  return graph( std::move( name ), clock_period_ps, std::move( nodes ) );
}

} // namespace isdc
