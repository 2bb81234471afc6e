#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include <isdc/engine.hpp>
#include <isdc/extraction.hpp>

#include "test_util.hpp"

using namespace isdc;

namespace
{

graph load_fixture( std::string const& name )
{
  std::ifstream in( std::string( ISDC_FIXTURE_DIR ) + "/" + name );
  REQUIRE( in.good() );
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_graph( ss.str() );
}

candidate_path const& find_candidate( std::vector<candidate_path> const& cands, std::string const& dst )
{
  for ( auto const& c : cands )
    if ( c.dst == dst )
      return c;
  REQUIRE( false );
  return cands.front();
}

} // namespace

TEST_CASE( "two-chain example: candidates, scores, both rankings" )
{
  graph g = load_fixture( "two_chains.json" );
  auto [s, m] = run_sdc( g );

  auto cands = enumerate_candidates( g, s, m );
  REQUIRE( cands.size() == 2 );

  auto const& a = find_candidate( cands, "a2" );
  CHECK( a.src == "a1" ); /* 10000 via v1 ties; smaller id wins */
  CHECK( a.ccp_delay_ps == 10000 );
  CHECK( a.score.to_double() == doctest::Approx( 3.0 ) ); /* (8 + 1) / 3 */

  auto const& b = find_candidate( cands, "b2" );
  CHECK( b.src == "b1" );
  CHECK( b.ccp_delay_ps == 9000 );
  CHECK( b.score.to_double() == doctest::Approx( 4.45 ) ); /* (8 + 0.9) / 2 */

  auto by_delay = rank_and_take( cands, rank_strategy::delay_driven, 2 );
  CHECK( by_delay[0].dst == "a2" );
  auto by_fanout = rank_and_take( cands, rank_strategy::fanout_driven, 2 );
  CHECK( by_fanout[0].dst == "b2" );
}

TEST_CASE( "score denominator counts users + 1" )
{
  graph g( "dead", 10000, { { "v", "input", 8, 0, {} } } );
  candidate_path c{ "v", "v", 2000, {} };
  rational const r = score_fanout( c, g, 10000 );
  CHECK( r.den == 10000 ); /* zero users: denominator is T * 1 */
  CHECK( r.to_double() == doctest::Approx( 8.2 ) );
}

TEST_CASE( "rank_and_take: m larger than candidate count, permutation invariance" )
{
  graph g = load_fixture( "two_chains.json" );
  auto [s, m] = run_sdc( g );
  auto cands = enumerate_candidates( g, s, m );

  auto all = rank_and_take( cands, rank_strategy::fanout_driven, 100 );
  CHECK( all.size() == cands.size() );

  auto reversed = cands;
  std::reverse( reversed.begin(), reversed.end() );
  auto ranked_a = rank_and_take( cands, rank_strategy::delay_driven, 2 );
  auto ranked_b = rank_and_take( reversed, rank_strategy::delay_driven, 2 );
  REQUIRE( ranked_a.size() == ranked_b.size() );
  for ( std::size_t i = 0; i < ranked_a.size(); ++i )
  {
    CHECK( ranked_a[i].dst == ranked_b[i].dst );
    CHECK( ranked_a[i].src == ranked_b[i].src );
  }
}

TEST_CASE( "cone expansion: trivial root-only cone and whole-chain cone" )
{
  graph g( "chain", 10000,
           { { "a", "input", 8, 0, {} },
             { "b", "mul", 8, 6000, { "a" } },
             { "c", "mul", 8, 6000, { "b" } } } );
  auto [s, m] = run_sdc( g );
  /* 6000 + 6000 > T forces b and c apart */
  REQUIRE( s.stage_of( g, "c" ) == s.stage_of( g, "b" ) + 1 );

  candidate_path cb{ "b", "b", 6000, {} };
  subgraph cone_b = expand_to_cone( cb, g, s );
  /* b's operand a shares the stage, a is an input leaf */
  CHECK( cone_b.nodes == std::vector<std::string>{ "a", "b" } );
  CHECK( cone_b.leaves == std::vector<std::string>{ "a" } );
  CHECK( cone_b.roots == std::vector<std::string>{ "b" } );

  candidate_path cc{ "c", "c", 6000, {} };
  subgraph cone_c = expand_to_cone( cc, g, s );
  /* c's only operand is in an earlier stage: c is its own leaf */
  CHECK( cone_c.nodes == std::vector<std::string>{ "c" } );
  CHECK( cone_c.leaves == std::vector<std::string>{ "c" } );
}

TEST_CASE( "path realization follows the longest same-stage path" )
{
  graph g = load_fixture( "two_chains.json" );
  auto [s, m] = run_sdc( g );
  auto cands = enumerate_candidates( g, s, m );
  subgraph p = realize_path( find_candidate( cands, "a2" ), g, s );
  CHECK( p.kind == subgraph_kind::path );
  CHECK( p.nodes == std::vector<std::string>{ "a1", "a2" } );
  CHECK( p.leaves == std::vector<std::string>{ "a1" } );
  CHECK( p.roots == std::vector<std::string>{ "a2" } );
}

TEST_CASE( "window merge: shared leaf, disjoint leaves, identical leaf sets" )
{
  /* two mul roots off one shared input, plus an unrelated pair */
  graph g( "w", 10000,
           { { "x", "input", 8, 0, {} },
             { "r1", "mul", 8, 1000, { "x" } },
             { "r2", "mul", 8, 1000, { "x" } },
             { "y", "input", 8, 0, {} },
             { "r3", "mul", 8, 1000, { "y" } } } );
  auto [s, m] = run_sdc( g );

  auto cone = [&]( std::string const& root ) {
    return expand_to_cone( candidate_path{ root, root, 0, {} }, g, s );
  };

  auto windows = merge_to_windows( { cone( "r1" ), cone( "r2" ), cone( "r3" ) } );
  REQUIRE( windows.size() == 2 );
  CHECK( windows[0].kind == subgraph_kind::window );
  CHECK( windows[0].roots == std::vector<std::string>{ "r1", "r2" } );
  CHECK( windows[0].nodes == std::vector<std::string>{ "r1", "r2", "x" } );
  CHECK( windows[0].leaves == std::vector<std::string>{ "x" } );
  CHECK( windows[1].kind == subgraph_kind::cone );
  CHECK( windows[1].roots == std::vector<std::string>{ "r3" } );
}

TEST_CASE( "window merge respects the node cap" )
{
  graph g( "cap", 10000,
           { { "x", "input", 8, 0, {} },
             { "r1", "mul", 8, 1000, { "x" } },
             { "r2", "mul", 8, 1000, { "x" } } } );
  auto [s, m] = run_sdc( g );
  auto cone = [&]( std::string const& root ) {
    return expand_to_cone( candidate_path{ root, root, 0, {} }, g, s );
  };

  /* merged size would be 3 > cap 2: both cones pass through */
  auto windows = merge_to_windows( { cone( "r1" ), cone( "r2" ) }, 2 );
  REQUIRE( windows.size() == 2 );
  CHECK( windows[0].kind == subgraph_kind::cone );
  CHECK( windows[1].kind == subgraph_kind::cone );
}

TEST_CASE( "cones and windows satisfy both closure properties on random graphs" )
{
  test_util::rng r( 211 );
  int checked = 0;
  for ( int i = 0; i < 30; ++i )
  {
    graph g = test_util::random_dag( r, 4 + r.below( 14 ), 900, 1000 );
    delay_matrix m = init_matrix( g );
    auto pairs = timing_pairs( m, 1000 );
    bool self_loop = false;
    for ( auto const& tp : pairs )
      self_loop |= tp.u == tp.v;
    if ( self_loop )
      continue;
    schedule s = solve( g, build_constraints( g, m, 1000 ) );

    auto cands = enumerate_candidates( g, s, m );
    std::vector<subgraph> cones;
    for ( auto const& c : cands )
    {
      subgraph cone = expand_to_cone( c, g, s );
      CHECK( test_util::check_cone_properties( g, cone ) );
      cones.push_back( std::move( cone ) );
      ++checked;
    }
    for ( auto const& w : merge_to_windows( cones ) )
      CHECK( test_util::check_cone_properties( g, w ) );
  }
  CHECK( checked > 0 );
}

TEST_CASE( "fanout score scales with destination width" )
{
  graph narrow( "n", 10000,
                { { "x", "input", 8, 0, {} }, { "d", "mul", 8, 1000, { "x" } } } );
  graph wide( "w", 10000,
              { { "x", "input", 8, 0, {} }, { "d", "mul", 32, 1000, { "x" } } } );
  candidate_path c{ "x", "d", 5000, {} };
  CHECK( score_fanout( c, wide, 10000 ) > score_fanout( c, narrow, 10000 ) );
}
