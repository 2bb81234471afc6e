#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <isdc/graph.hpp>

#include "test_util.hpp"

using namespace isdc;

namespace
{

graph tiny()
{
  return parse_graph( R"({
    "name": "tiny",
    "clock_period_ps": 1000,
    "nodes": [
      {"id": "a", "op": "input", "bits": 8, "delay_ps": 0, "operands": []},
      {"id": "b", "op": "add", "bits": 8, "delay_ps": 100, "operands": ["a"]}
    ]})" );
}

} // namespace

TEST_CASE( "smallest valid graph parses with topo order [input, add]" )
{
  graph g = tiny();
  CHECK( g.size() == 2 );
  CHECK( topo_order( g ) == std::vector<std::string>{ "a", "b" } );
}

TEST_CASE( "dangling operand names the missing id" )
{
  try
  {
    parse_graph( R"({"name":"x","clock_period_ps":1000,"nodes":[
      {"id":"a","op":"add","bits":1,"delay_ps":1,"operands":["vX"]}]})" );
    FAIL( "expected dangling_operand_error" );
  }
  catch ( dangling_operand_error const& e )
  {
    CHECK( std::string( e.what() ).find( "vX" ) != std::string::npos );
  }
}

TEST_CASE( "mutual references are a cycle error" )
{
  CHECK_THROWS_AS( parse_graph( R"({"name":"x","clock_period_ps":1000,"nodes":[
    {"id":"a","op":"add","bits":1,"delay_ps":1,"operands":["b"]},
    {"id":"b","op":"add","bits":1,"delay_ps":1,"operands":["a"]}]})" ),
                   cycle_error );
}

TEST_CASE( "duplicate ids are rejected" )
{
  CHECK_THROWS_AS( parse_graph( R"({"name":"x","clock_period_ps":1000,"nodes":[
    {"id":"a","op":"input","bits":1,"delay_ps":0,"operands":[]},
    {"id":"a","op":"input","bits":1,"delay_ps":0,"operands":[]}]})" ),
                   duplicate_id_error );
}

TEST_CASE( "field-level violations are parse errors" )
{
  CHECK_THROWS_AS( parse_graph( R"({"name":"x","clock_period_ps":1000,"nodes":[]})" ), parse_error );
  CHECK_THROWS_AS( parse_graph( R"({"name":"x","clock_period_ps":1000,"nodes":[
    {"id":"a","op":"input","bits":0,"delay_ps":0,"operands":[]}]})" ),
                   parse_error );
  CHECK_THROWS_AS( parse_graph( R"({"name":"x","clock_period_ps":1000,"nodes":[
    {"id":"a","op":"input","bits":1,"delay_ps":5,"operands":[]}]})" ),
                   parse_error );
  CHECK_THROWS_AS( parse_graph( "{ not json" ), parse_error );
}

TEST_CASE( "topo order: chain, diamond tie break, single node" )
{
  graph chain( "c", 1000,
               { { "a", "input", 1, 0, {} }, { "b", "add", 1, 1, { "a" } }, { "c", "add", 1, 1, { "b" } } } );
  CHECK( topo_order( chain ) == std::vector<std::string>{ "a", "b", "c" } );

  graph diamond( "d", 1000,
                 { { "a", "input", 1, 0, {} },
                   { "b", "add", 1, 1, { "a" } },
                   { "c", "add", 1, 1, { "a" } },
                   { "d", "add", 1, 1, { "b", "c" } } } );
  CHECK( topo_order( diamond ) == std::vector<std::string>{ "a", "b", "c", "d" } );

  graph single( "s", 1000, { { "a", "input", 1, 0, {} } } );
  CHECK( topo_order( single ) == std::vector<std::string>{ "a" } );
}

TEST_CASE( "users: multiple consumers, dead value, double operand slot" )
{
  graph g( "u", 1000,
           { { "r3", "input", 1, 0, {} },
             { "v6", "add", 1, 1, { "r3" } },
             { "v7", "add", 1, 1, { "r3" } },
             { "dbl", "mul", 1, 1, { "v6", "v6" } } } );
  CHECK( users( g, "r3" ).size() == 2 );
  CHECK( users( g, "dbl" ).empty() );
  auto dbl_uses = users( g, "v6" );
  REQUIRE( dbl_uses.size() == 2 );
  CHECK( dbl_uses[0].operand_index == 0 );
  CHECK( dbl_uses[1].operand_index == 1 );
  CHECK_THROWS_AS( users( g, "nope" ), unknown_node_error );
}

TEST_CASE( "round trip and degree-sum properties on random graphs" )
{
  test_util::rng r( 7 );
  for ( int i = 0; i < 50; ++i )
  {
    graph g = test_util::random_dag( r, 1 + r.below( 15 ), 500, 1000 );
    graph back = parse_graph( serialize_graph( g ) );
    CHECK( serialize_graph( back ) == serialize_graph( g ) );

    std::size_t uses = 0, operands = 0;
    for ( std::size_t v = 0; v < g.size(); ++v )
    {
      uses += g.uses_of( v ).size();
      operands += g.operand_indices( v ).size();
    }
    CHECK( uses == operands );

    auto const order = topo_order( g );
    CHECK( order.size() == g.size() );
    std::map<std::string, std::size_t> pos;
    for ( std::size_t i2 = 0; i2 < order.size(); ++i2 )
      pos[order[i2]] = i2;
    for ( std::size_t v = 0; v < g.size(); ++v )
      for ( auto p : g.operand_indices( v ) )
        CHECK( pos[g.at( p ).id] < pos[g.at( v ).id] );
  }
}
