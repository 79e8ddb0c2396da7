#include "gatekit/sim.hpp"

#include "gatekit/error.hpp"

#include <algorithm>
#include <bit>
#include <random>
#include <thread>

namespace gatekit
{

namespace
{

constexpr std::size_t words_for( std::size_t bits ) noexcept
{
  return ( bits + 63u ) / 64u;
}

void check_lengths( signature const& a, signature const& b )
{
  if ( a.num_bits() != b.num_bits() )
  {
    throw error( errc::signature_length_mismatch, std::to_string( a.num_bits() ) + " vs " + std::to_string( b.num_bits() ) + " bits" );
  }
}

} // namespace

signature::signature( std::size_t num_bits ) : words_( words_for( num_bits ), 0u ), num_bits_( num_bits ) {}

signature::signature( std::vector<std::uint64_t> words, std::size_t num_bits ) : words_( std::move( words ) ), num_bits_( num_bits )
{
  auto const needed = words_for( num_bits );
  if ( words_.size() < needed )
  {
    throw error( errc::signature_length_mismatch, "too few words for " + std::to_string( num_bits ) + " bits" );
  }
  for ( auto k = needed; k < words_.size(); ++k )
  {
    if ( words_[k] != 0u )
    {
      throw error( errc::signature_length_mismatch, "non-zero padding word" );
    }
  }
  if ( needed > 0u && ( words_[needed - 1u] & ~tail_mask() ) != 0u )
  {
    throw error( errc::signature_length_mismatch, "bits set beyond the pattern count" );
  }
}

std::uint64_t signature::tail_mask() const noexcept
{
  auto const rem = num_bits_ & 63u;
  return rem == 0u ? ~std::uint64_t{ 0 } : ( ( std::uint64_t{ 1 } << rem ) - 1u );
}

void signature::set_bit( std::size_t k, bool value )
{
  auto& w = words_.at( k >> 6 );
  auto const m = std::uint64_t{ 1 } << ( k & 63u );
  w = value ? ( w | m ) : ( w & ~m );
}

void signature::push_back( bool value )
{
  if ( words_for( num_bits_ + 1u ) > words_.size() )
  {
    words_.push_back( 0u );
  }
  ++num_bits_;
  set_bit( num_bits_ - 1u, value );
}

void signature::mask_tail() noexcept
{
  auto const needed = words_for( num_bits_ );
  if ( needed > 0u )
  {
    words_[needed - 1u] &= tail_mask();
  }
  for ( auto k = needed; k < words_.size(); ++k )
  {
    words_[k] = 0u;
  }
}

std::size_t signature::popcount() const noexcept
{
  std::size_t count = 0u;
  for ( auto w : words_ )
  {
    count += static_cast<std::size_t>( std::popcount( w ) );
  }
  return count;
}

bool operator==( signature const& a, signature const& b ) noexcept
{
  if ( a.num_bits_ != b.num_bits_ )
  {
    return false;
  }
  auto const n = words_for( a.num_bits_ );
  return std::equal( a.words_.begin(), a.words_.begin() + n, b.words_.begin() );
}

std::vector<signature> random_patterns( std::size_t num_pi, sim_config const& config )
{
  std::vector<signature> out;
  out.reserve( num_pi );
  for ( std::size_t k = 0; k < num_pi; ++k )
  {
    std::seed_seq seq{ static_cast<std::uint32_t>( config.seed ), static_cast<std::uint32_t>( config.seed >> 32 ), static_cast<std::uint32_t>( k ), 0x5167u };
    std::mt19937_64 rng( seq );
    signature sig( config.num_patterns );
    for ( auto& w : sig.words() )
    {
      w = rng();
    }
    sig.mask_tail();
    out.push_back( std::move( sig ) );
  }
  return out;
}

std::vector<signature> exhaustive_patterns( std::size_t num_pi )
{
  auto const bits = std::size_t{ 1 } << num_pi;
  std::vector<signature> out;
  out.reserve( num_pi );
  for ( std::size_t k = 0; k < num_pi; ++k )
  {
    signature sig( bits );
    for ( std::size_t p = 0; p < bits; ++p )
    {
      if ( ( p >> k ) & 1u )
      {
        sig.set_bit( p, true );
      }
    }
    out.push_back( std::move( sig ) );
  }
  return out;
}

std::vector<signature> input_patterns( std::size_t num_pi, sim_config const& config )
{
  if ( num_pi < 63u && ( std::size_t{ 1 } << num_pi ) <= config.num_patterns )
  {
    return exhaustive_patterns( num_pi );
  }
  return random_patterns( num_pi, config );
}

std::vector<signature> simulate( aig const& g, std::span<signature const> pi_signatures, unsigned num_threads )
{
  if ( pi_signatures.size() != g.num_pis() )
  {
    throw error( errc::signature_length_mismatch, "expected one signature per PI" );
  }
  auto const bits = pi_signatures.empty() ? 0u : pi_signatures.front().num_bits();
  for ( auto const& s : pi_signatures )
  {
    if ( s.num_bits() != bits )
    {
      throw error( errc::signature_length_mismatch, "PI signatures differ in length" );
    }
  }

  std::vector<signature> sigs( g.size(), signature( bits ) );
  auto const num_words = words_for( bits );
  std::uint64_t const tail = sigs.empty() ? 0u : sigs.front().tail_mask();

  auto run_range = [&]( std::size_t begin, std::size_t end ) {
    for ( node_index n = 0; n < g.size(); ++n )
    {
      auto const& nd = g.node( n );
      auto out = sigs[n].words();
      switch ( nd.kind )
      {
      case gate_kind::pi:
      {
        auto const in = pi_signatures[static_cast<std::size_t>( g.pi_position( n ) )].words();
        std::copy( in.begin() + begin, in.begin() + end, out.begin() + begin );
        break;
      }
      case gate_kind::not_gate:
      {
        auto const a = sigs[nd.fanin[0]].words();
        for ( auto w = begin; w < end; ++w )
        {
          out[w] = ~a[w];
        }
        if ( end == num_words && end > begin )
        {
          out[end - 1u] &= tail;
        }
        break;
      }
      case gate_kind::and_gate:
      {
        auto const a = sigs[nd.fanin[0]].words();
        auto const b = sigs[nd.fanin[1]].words();
        for ( auto w = begin; w < end; ++w )
        {
          out[w] = a[w] & b[w];
        }
        break;
      }
      }
    }
  };

  num_threads = std::max( 1u, std::min<unsigned>( num_threads, static_cast<unsigned>( num_words ) ) );
  if ( num_threads <= 1u )
  {
    run_range( 0u, num_words );
    return sigs;
  }
  {
    std::vector<std::jthread> workers;
    auto const chunk = ( num_words + num_threads - 1u ) / num_threads;
    for ( unsigned t = 0; t < num_threads; ++t )
    {
      auto const begin = std::min( num_words, t * chunk );
      auto const end = std::min( num_words, begin + chunk );
      if ( begin < end )
      {
        workers.emplace_back( run_range, begin, end );
      }
    }
  }
  return sigs;
}

double logic_prob( signature const& sig ) noexcept
{
  if ( sig.num_bits() == 0u )
  {
    return 0.0;
  }
  return static_cast<double>( sig.popcount() ) / static_cast<double>( sig.num_bits() );
}

std::size_t hamming_distance( signature const& a, signature const& b )
{
  check_lengths( a, b );
  auto const wa = a.words();
  auto const wb = b.words();
  auto const n = std::min( wa.size(), wb.size() );
  std::size_t count = 0u;
  for ( std::size_t k = 0; k < n; ++k )
  {
    count += static_cast<std::size_t>( std::popcount( wa[k] ^ wb[k] ) );
  }
  return count;
}

double tt_distance( signature const& a, signature const& b )
{
  auto const hd = hamming_distance( a, b );
  return a.num_bits() == 0u ? 0.0 : static_cast<double>( hd ) / static_cast<double>( a.num_bits() );
}

} // namespace gatekit
