/*!
  \file oracle.hpp
  \brief Subgraph delay oracles: two built-in simulated models and an
         external subprocess speaking a line-delimited JSON protocol.

  Wire protocol: one request per line on the child's stdin,
  `{"subgraph_id", "clock_period_ps", "nodes", "leaves", "roots"}`; one
  response per line on stdout, `{"subgraph_id", "delay_ps"}`, any order.
  Closing stdin ends the batch; the child must exit 0.
*/

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "extraction.hpp"
#include "graph.hpp"

namespace isdc
{

class oracle_error : public std::runtime_error
{
public:
  explicit oracle_error( std::string const& what, int subgraph_id = -1 )
      : std::runtime_error( what ), subgraph_id( subgraph_id )
  {
  }

  int subgraph_id; /* offending subgraph, -1 if not attributable */
};

/*! \brief External command could not be started at all. */
class oracle_spawn_error : public oracle_error
{
public:
  using oracle_error::oracle_error;
};

struct request_node
{
  std::string id;
  std::string op;
  std::int64_t bits;
  std::int64_t delay_ps;
  std::vector<std::optional<std::string>> operands; /* nullopt marks an external operand */
};

/*! \brief Self-contained subgraph description handed to a delay oracle. */
struct oracle_request
{
  int subgraph_id = 0;
  std::int64_t clock_period_ps = 0;
  std::vector<request_node> nodes;
  std::vector<std::string> leaves;
  std::vector<std::string> roots;
};

struct oracle_response
{
  int subgraph_id = 0;
  std::int64_t delay_ps = 0;
};

/*! \brief Builds the oracle request for a subgraph: member nodes in
 *         topological order, operands outside the subgraph replaced by an
 *         external marker.
 */
inline oracle_request make_request( subgraph const& sg, graph const& g )
{
  oracle_request req;
  req.subgraph_id = sg.id;
  req.clock_period_ps = g.clock_period_ps();
  req.leaves = sg.leaves;
  req.roots = sg.roots;

  std::set<std::string> members( sg.nodes.begin(), sg.nodes.end() );
  for ( auto i : g.topo_indices() )
  {
    node const& n = g.at( i );
    if ( !members.count( n.id ) )
      continue;
    request_node rn;
    rn.id = n.id;
    rn.op = n.op;
    rn.bits = n.bits;
    rn.delay_ps = n.delay_ps;
    for ( auto const& op_id : n.operands )
    {
      if ( members.count( op_id ) )
        rn.operands.emplace_back( op_id );
      else
        rn.operands.emplace_back( std::nullopt );
    }
    req.nodes.push_back( std::move( rn ) );
  }
  return req;
}

inline nlohmann::json request_to_json( oracle_request const& req )
{
  nlohmann::json j;
  j["subgraph_id"] = req.subgraph_id;
  j["clock_period_ps"] = req.clock_period_ps;
  j["nodes"] = nlohmann::json::array();
  for ( auto const& n : req.nodes )
  {
    nlohmann::json jn;
    jn["id"] = n.id;
    jn["op"] = n.op;
    jn["bits"] = n.bits;
    jn["delay_ps"] = n.delay_ps;
    jn["operands"] = nlohmann::json::array();
    for ( auto const& op : n.operands )
    {
      if ( op )
        jn["operands"].push_back( *op );
      else
        jn["operands"].push_back( nullptr );
    }
    j["nodes"].push_back( std::move( jn ) );
  }
  j["leaves"] = req.leaves;
  j["roots"] = req.roots;
  return j;
}

inline oracle_request request_from_json( nlohmann::json const& j )
{
  oracle_request req;
  req.subgraph_id = j.at( "subgraph_id" ).get<int>();
  req.clock_period_ps = j.at( "clock_period_ps" ).get<std::int64_t>();
  for ( auto const& jn : j.at( "nodes" ) )
  {
    request_node n;
    n.id = jn.at( "id" ).get<std::string>();
    n.op = jn.at( "op" ).get<std::string>();
    n.bits = jn.at( "bits" ).get<std::int64_t>();
    n.delay_ps = jn.at( "delay_ps" ).get<std::int64_t>();
    for ( auto const& jop : jn.at( "operands" ) )
    {
      if ( jop.is_null() )
        n.operands.emplace_back( std::nullopt );
      else
        n.operands.emplace_back( jop.get<std::string>() );
    }
    req.nodes.push_back( std::move( n ) );
  }
  req.leaves = j.at( "leaves" ).get<std::vector<std::string>>();
  req.roots = j.at( "roots" ).get<std::vector<std::string>>();
  return req;
}

namespace detail
{

/* Longest path to each request node by an arbitrary per-node weight, edges
 * restricted to in-subgraph operands. Tolerates any input node order. */
template<typename WeightFn>
std::int64_t longest_internal_path( oracle_request const& req, WeightFn const& weight )
{
  std::map<std::string, std::size_t> index;
  for ( std::size_t i = 0; i < req.nodes.size(); ++i )
    index[req.nodes[i].id] = i;

  /* topological order within the request */
  std::vector<std::size_t> indeg( req.nodes.size(), 0 );
  for ( std::size_t i = 0; i < req.nodes.size(); ++i )
    for ( auto const& op : req.nodes[i].operands )
      if ( op && index.count( *op ) )
        ++indeg[i];
  std::vector<std::size_t> order;
  std::vector<bool> done( req.nodes.size(), false );
  while ( order.size() < req.nodes.size() )
  {
    std::size_t pick = req.nodes.size();
    for ( std::size_t i = 0; i < req.nodes.size(); ++i )
      if ( !done[i] && indeg[i] == 0 )
      {
        pick = i;
        break;
      }
    if ( pick == req.nodes.size() )
      throw oracle_error( "cyclic subgraph in oracle request", req.subgraph_id );
    done[pick] = true;
    order.push_back( pick );
    for ( std::size_t i = 0; i < req.nodes.size(); ++i )
      if ( !done[i] )
        for ( auto const& op : req.nodes[i].operands )
          if ( op && index.count( *op ) && index[*op] == pick )
            --indeg[i];
  }

  std::vector<std::int64_t> dist( req.nodes.size(), 0 );
  std::int64_t best = 0;
  std::set<std::string> roots( req.roots.begin(), req.roots.end() );
  for ( auto i : order )
  {
    dist[i] = weight( req.nodes[i] );
    for ( auto const& op : req.nodes[i].operands )
      if ( op && index.count( *op ) )
        dist[i] = std::max( dist[i], dist[index[*op]] + weight( req.nodes[i] ) );
    if ( roots.empty() || roots.count( req.nodes[i].id ) )
      best = std::max( best, dist[i] );
  }
  return best;
}

} // namespace detail

/*! \brief Unoptimized estimate: longest leaf-to-root path by summed
 *         individual delays inside the subgraph.
 */
inline std::int64_t naive_subgraph_delay( oracle_request const& req )
{
  return detail::longest_internal_path( req, []( request_node const& n ) { return n.delay_ps; } );
}

/*! \brief Delay oracle interface; batches are returned sorted by subgraph_id. */
class delay_oracle
{
public:
  virtual ~delay_oracle() = default;

  std::vector<oracle_response> evaluate_batch( std::vector<oracle_request> const& reqs )
  {
    auto responses = evaluate( reqs );
    std::sort( responses.begin(), responses.end(),
               []( oracle_response const& a, oracle_response const& b ) { return a.subgraph_id < b.subgraph_id; } );
    if ( responses.size() != reqs.size() )
      throw oracle_error( "oracle returned " + std::to_string( responses.size() ) + " responses for " +
                          std::to_string( reqs.size() ) + " requests" );
    for ( auto const& r : responses )
      if ( r.delay_ps < 1 )
        throw oracle_error( "oracle returned non-positive delay", r.subgraph_id );
    return responses;
  }

protected:
  virtual std::vector<oracle_response> evaluate( std::vector<oracle_request> const& reqs ) = 0;
};

/*! \brief Models uniform logic-optimization benefit: delay = max(floor(beta
 *         x naive), max individual node delay). The factor is kept as an
 *         exact fraction parsed from its decimal spelling.
 */
class scale_oracle final : public delay_oracle
{
public:
  scale_oracle( std::int64_t num, std::int64_t den ) : num_( num ), den_( den )
  {
    if ( num_ <= 0 || den_ <= 0 )
      throw oracle_error( "scale factor must be positive" );
  }

  /*! \brief Parses a decimal factor like "0.7" into an exact fraction. */
  static scale_oracle from_string( std::string const& text )
  {
    auto const dot = text.find( '.' );
    try
    {
      if ( dot == std::string::npos )
        return scale_oracle( std::stoll( text ), 1 );
      std::string digits = text.substr( 0, dot ) + text.substr( dot + 1 );
      std::int64_t den = 1;
      for ( std::size_t i = dot + 1; i < text.size(); ++i )
        den *= 10;
      return scale_oracle( std::stoll( digits ), den );
    }
    catch ( std::logic_error const& )
    {
      throw oracle_error( "invalid scale factor: " + text );
    }
  }

  std::int64_t delay_for( oracle_request const& req ) const
  {
    std::int64_t const naive = naive_subgraph_delay( req );
    std::int64_t scaled = naive * num_ / den_;
    for ( auto const& n : req.nodes )
      scaled = std::max( scaled, n.delay_ps );
    return std::max<std::int64_t>( scaled, 1 );
  }

protected:
  std::vector<oracle_response> evaluate( std::vector<oracle_request> const& reqs ) override
  {
    std::vector<oracle_response> out;
    for ( auto const& r : reqs )
      out.push_back( { r.subgraph_id, delay_for( r ) } );
    return out;
  }

private:
  std::int64_t num_;
  std::int64_t den_;
};

/*! \brief Models the AIG-depth correlation: per-op logic depths composed by
 *         the longest depth path, times a unit delay.
 */
class depth_oracle final : public delay_oracle
{
public:
  depth_oracle( std::map<std::string, std::int64_t> depths, std::int64_t default_depth, std::int64_t unit_ps )
      : depths_( std::move( depths ) ), default_depth_( default_depth ), unit_ps_( unit_ps )
  {
    if ( unit_ps_ <= 0 )
      throw oracle_error( "depth_unit_ps must be positive" );
  }

  /*! \brief Table file: {"depth_unit_ps": N, "ops": {op: depth, ...}, "default": N}. */
  static depth_oracle from_table_json( std::string const& text )
  {
    nlohmann::json j;
    try
    {
      j = nlohmann::json::parse( text );
      return depth_oracle( j.at( "ops" ).get<std::map<std::string, std::int64_t>>(),
                           j.value( "default", std::int64_t{ 1 } ), j.at( "depth_unit_ps" ).get<std::int64_t>() );
    }
    catch ( nlohmann::json::exception const& e )
    {
      throw oracle_error( std::string( "invalid depth table: " ) + e.what() );
    }
  }

  std::int64_t delay_for( oracle_request const& req ) const
  {
    std::int64_t const depth = detail::longest_internal_path( req, [this]( request_node const& n ) {
      auto it = depths_.find( n.op );
      return it == depths_.end() ? default_depth_ : it->second;
    } );
    return std::max<std::int64_t>( depth * unit_ps_, 1 );
  }

protected:
  std::vector<oracle_response> evaluate( std::vector<oracle_request> const& reqs ) override
  {
    std::vector<oracle_response> out;
    for ( auto const& r : reqs )
      out.push_back( { r.subgraph_id, delay_for( r ) } );
    return out;
  }

private:
  std::map<std::string, std::int64_t> depths_;
  std::int64_t default_depth_;
  std::int64_t unit_ps_;
};

/*! \brief Runs an external command per batch and speaks the wire protocol
 *         over its stdin/stdout.
 */
class external_oracle final : public delay_oracle
{
public:
  explicit external_oracle( std::string command, int timeout_s = 300 )
      : command_( std::move( command ) ), timeout_s_( timeout_s )
  {
  }

protected:
  std::vector<oracle_response> evaluate( std::vector<oracle_request> const& reqs ) override
  {
    std::string input;
    for ( auto const& r : reqs )
      input += request_to_json( r ).dump() + "\n";

    std::string output = run_child( input );

    std::vector<oracle_response> out;
    std::size_t pos = 0;
    while ( pos < output.size() )
    {
      std::size_t eol = output.find( '\n', pos );
      if ( eol == std::string::npos )
        eol = output.size();
      std::string line = output.substr( pos, eol - pos );
      pos = eol + 1;
      if ( line.find_first_not_of( " \t\r" ) == std::string::npos )
        continue;
      try
      {
        auto j = nlohmann::json::parse( line );
        out.push_back( { j.at( "subgraph_id" ).get<int>(), j.at( "delay_ps" ).get<std::int64_t>() } );
      }
      catch ( nlohmann::json::exception const& e )
      {
        throw oracle_error( std::string( "protocol violation from external oracle: " ) + e.what() );
      }
    }
    return out;
  }

private:
  std::string run_child( std::string const& input )
  {
    int in_pipe[2];  /* parent -> child */
    int out_pipe[2]; /* child -> parent */
    if ( pipe( in_pipe ) != 0 || pipe( out_pipe ) != 0 )
      throw oracle_spawn_error( "failed to create pipes for external oracle" );

    pid_t const pid = fork();
    if ( pid < 0 )
      throw oracle_spawn_error( "failed to fork external oracle process" );
    if ( pid == 0 )
    {
      dup2( in_pipe[0], STDIN_FILENO );
      dup2( out_pipe[1], STDOUT_FILENO );
      close( in_pipe[0] );
      close( in_pipe[1] );
      close( out_pipe[0] );
      close( out_pipe[1] );
      execl( "/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>( nullptr ) );
      _exit( 127 );
    }

    close( in_pipe[0] );
    close( out_pipe[1] );
    fcntl( in_pipe[1], F_SETFL, O_NONBLOCK );
    fcntl( out_pipe[0], F_SETFL, O_NONBLOCK );
    signal( SIGPIPE, SIG_IGN );

    std::string output;
    std::size_t written = 0;
    bool in_open = true;
    bool out_open = true;
    auto const deadline = std::chrono::steady_clock::now() + std::chrono::seconds( timeout_s_ );

    while ( out_open )
    {
      auto const now = std::chrono::steady_clock::now();
      if ( now >= deadline )
      {
        kill( pid, SIGKILL );
        waitpid( pid, nullptr, 0 );
        if ( in_open )
          close( in_pipe[1] );
        close( out_pipe[0] );
        throw oracle_error( "external oracle timed out after " + std::to_string( timeout_s_ ) + "s" );
      }
      int const wait_ms = static_cast<int>(
          std::chrono::duration_cast<std::chrono::milliseconds>( deadline - now ).count() );

      pollfd fds[2];
      nfds_t nfds = 0;
      pollfd* out_fd = &fds[nfds++];
      *out_fd = { out_pipe[0], POLLIN, 0 };
      pollfd* in_fd = nullptr;
      if ( in_open )
      {
        in_fd = &fds[nfds++];
        *in_fd = { in_pipe[1], POLLOUT, 0 };
      }
      if ( poll( fds, nfds, std::min( wait_ms, 1000 ) ) < 0 )
        continue;

      if ( in_fd && ( in_fd->revents & ( POLLOUT | POLLERR ) ) )
      {
        if ( in_fd->revents & POLLERR )
        {
          close( in_pipe[1] );
          in_open = false;
        }
        else
        {
          ssize_t const n = write( in_pipe[1], input.data() + written, input.size() - written );
          if ( n > 0 )
            written += static_cast<std::size_t>( n );
          if ( written == input.size() || n < 0 )
          {
            close( in_pipe[1] );
            in_open = false;
          }
        }
      }
      if ( out_fd->revents & ( POLLIN | POLLHUP ) )
      {
        char buf[4096];
        ssize_t const n = read( out_pipe[0], buf, sizeof buf );
        if ( n > 0 )
          output.append( buf, static_cast<std::size_t>( n ) );
        else if ( n == 0 )
          out_open = false;
        else if ( out_fd->revents & POLLHUP )
          out_open = false;
      }
    }
    if ( in_open )
      close( in_pipe[1] );
    close( out_pipe[0] );

    int status = 0;
    waitpid( pid, &status, 0 );
    if ( WIFEXITED( status ) && WEXITSTATUS( status ) == 127 )
      throw oracle_spawn_error( "external oracle command not found: " + command_ );
    if ( !WIFEXITED( status ) || WEXITSTATUS( status ) != 0 )
      throw oracle_error( "external oracle exited with non-zero status" );
    return output;
  }

  std::string command_;
  int timeout_s_;
};

} // namespace isdc
