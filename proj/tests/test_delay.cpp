#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <isdc/delay_matrix.hpp>

#include "test_util.hpp"

using namespace isdc;

namespace
{

graph chain_abc()
{
  return graph( "chain", 10000,
                { { "a", "op", 1, 3, {} }, { "b", "op", 1, 4, { "a" } }, { "c", "op", 1, 5, { "b" } },
                  { "x", "op", 1, 2, {} } } );
}

graph diamond()
{
  return graph( "diamond", 10000,
                { { "a", "op", 1, 1, {} },
                  { "b", "op", 1, 5, { "a" } },
                  { "c", "op", 1, 2, { "a" } },
                  { "d", "op", 1, 1, { "b", "c" } } } );
}

} // namespace

TEST_CASE( "init_matrix: chain sum, unconnected pair, diagonal" )
{
  graph g = chain_abc();
  delay_matrix m = init_matrix( g );
  CHECK( m.at( g.index_of( "a" ), g.index_of( "c" ) ) == 12 );
  CHECK( m.at( g.index_of( "a" ), g.index_of( "x" ) ) == delay_matrix::unconnected );
  CHECK( m.at( g.index_of( "x" ), g.index_of( "a" ) ) == delay_matrix::unconnected );
  CHECK( m.at( g.index_of( "x" ), g.index_of( "x" ) ) == 2 );
}

TEST_CASE( "init_matrix equals brute-force longest path on random DAGs" )
{
  test_util::rng r( 11 );
  for ( int i = 0; i < 50; ++i )
  {
    graph g = test_util::random_dag( r, 1 + r.below( 12 ), 900, 1000 );
    delay_matrix m = init_matrix( g );
    auto brute = test_util::brute_longest_paths( g );
    for ( std::size_t u = 0; u < g.size(); ++u )
      for ( std::size_t v = 0; v < g.size(); ++v )
        CHECK( m.at( u, v ) == brute[u][v] );
  }
}

TEST_CASE( "update_with_feedback: shorter wins, longer ignored, unconnected stays" )
{
  graph g = chain_abc();
  delay_matrix m = init_matrix( g );
  std::size_t const a = g.index_of( "a" ), c = g.index_of( "c" ), x = g.index_of( "x" );
  CHECK( m.at( a, c ) == 12 );

  update_with_feedback( m, g, { { { "a", "b", "c", "x" }, 7 } } );
  CHECK( m.at( a, c ) == 7 );
  CHECK( m.at( a, x ) == delay_matrix::unconnected );

  update_with_feedback( m, g, { { { "a", "b", "c" }, 9 } } );
  CHECK( m.at( a, c ) == 7 ); /* only shorter measurements apply */

  CHECK_THROWS_AS( update_with_feedback( m, g, { { { "nope" }, 1 } } ), unknown_node_error );
}

TEST_CASE( "feedback monotonicity property" )
{
  test_util::rng r( 23 );
  for ( int i = 0; i < 40; ++i )
  {
    graph g = test_util::random_dag( r, 2 + r.below( 12 ), 900, 1000 );
    delay_matrix m = init_matrix( g );

    std::vector<subgraph_feedback> batch;
    for ( int b = 0; b < 3; ++b )
    {
      subgraph_feedback fb;
      for ( std::size_t v = 0; v < g.size(); ++v )
        if ( r.below( 2 ) )
          fb.nodes.push_back( g.at( v ).id );
      if ( fb.nodes.empty() )
        fb.nodes.push_back( g.at( 0 ).id );
      fb.delay_ps = 1 + static_cast<std::int64_t>( r.below( 2000 ) );
      batch.push_back( std::move( fb ) );
    }

    delay_matrix before = m;
    update_with_feedback( m, g, batch );
    for ( std::size_t u = 0; u < g.size(); ++u )
    {
      for ( std::size_t v = 0; v < g.size(); ++v )
      {
        if ( before.at( u, v ) == delay_matrix::unconnected )
          CHECK( m.at( u, v ) == delay_matrix::unconnected );
        else
          CHECK( m.at( u, v ) <= before.at( u, v ) );
      }
    }
  }
}

TEST_CASE( "propagate: diamond before and after feedback" )
{
  graph g = diamond();
  std::size_t const a = g.index_of( "a" ), b = g.index_of( "b" ), d = g.index_of( "d" );

  delay_matrix m = init_matrix( g );
  CHECK( m.at( a, d ) == 7 ); /* a-b-d */
  propagate( m, g );
  CHECK( m.at( a, d ) == 7 ); /* no feedback: propagate is a no-op */

  m.set( a, b, 3 );
  propagate( m, g );
  CHECK( m.at( a, d ) == 4 ); /* max(3+1, 3+1), smaller than 7 */
}

TEST_CASE( "propagate is a no-op relative to init_matrix on random DAGs" )
{
  test_util::rng r( 31 );
  for ( int i = 0; i < 40; ++i )
  {
    graph g = test_util::random_dag( r, 1 + r.below( 12 ), 900, 1000 );
    delay_matrix m = init_matrix( g );
    delay_matrix p = m;
    propagate( p, g );
    for ( std::size_t u = 0; u < g.size(); ++u )
      for ( std::size_t v = 0; v < g.size(); ++v )
        CHECK( p.at( u, v ) == m.at( u, v ) );
  }
}

TEST_CASE( "repeated propagation never increases entries" )
{
  test_util::rng r( 37 );
  for ( int i = 0; i < 20; ++i )
  {
    graph g = test_util::random_dag( r, 2 + r.below( 12 ), 900, 1000 );
    delay_matrix m = init_matrix( g );
    /* random feedback first so propagation has work to do */
    std::vector<std::string> nodes;
    for ( std::size_t v = 0; v < g.size(); ++v )
      if ( r.below( 2 ) )
        nodes.push_back( g.at( v ).id );
    if ( !nodes.empty() )
      update_with_feedback( m, g, { { nodes, 1 + static_cast<std::int64_t>( r.below( 500 ) ) } } );

    delay_matrix once = m;
    propagate( once, g );
    delay_matrix twice = once;
    propagate( twice, g );
    for ( std::size_t u = 0; u < g.size(); ++u )
      for ( std::size_t v = 0; v < g.size(); ++v )
        if ( once.at( u, v ) != delay_matrix::unconnected )
          CHECK( twice.at( u, v ) <= once.at( u, v ) );
  }
}

TEST_CASE( "timing_pairs thresholds" )
{
  graph g( "t", 10000, { { "a", "input", 1, 0, {} }, { "b", "add", 1, 1, { "a" } } } );
  delay_matrix m( 2 );
  m.set( 0, 0, 0 );
  m.set( 1, 1, 1 );

  m.set( 0, 1, 12000 );
  auto tp = timing_pairs( m, 10000 );
  REQUIRE( tp.size() == 1 );
  CHECK( tp[0].gap == 1 );

  m.set( 0, 1, 10000 );
  CHECK( timing_pairs( m, 10000 ).empty() );

  m.set( 0, 1, 25000 );
  tp = timing_pairs( m, 10000 );
  REQUIRE( tp.size() == 1 );
  CHECK( tp[0].gap == 2 );
}

TEST_CASE( "matrix CSV dump uses topo order and -1 markers" )
{
  graph g = chain_abc();
  auto const csv = dump_matrix_csv( init_matrix( g ), g );
  CHECK( csv.find( "id,a,b,c,x" ) == 0 );
  CHECK( csv.find( "-1" ) != std::string::npos );
}
