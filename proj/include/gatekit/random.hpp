#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace gatekit
{

/*! \brief Engine used everywhere; the draws below are platform independent. */
using rng_engine = std::mt19937_64;

inline rng_engine make_rng( std::uint64_t seed, std::uint64_t stream = 0u )
{
  std::seed_seq seq{ static_cast<std::uint32_t>( seed ), static_cast<std::uint32_t>( seed >> 32 ), static_cast<std::uint32_t>( stream ),
                     static_cast<std::uint32_t>( stream >> 32 ) };
  return rng_engine( seq );
}

/*! \brief Splitmix64-style combination of two seeds. */
inline std::uint64_t mix_seed( std::uint64_t a, std::uint64_t b )
{
  auto z = a + 0x9e3779b97f4a7c15ull * ( b + 1u );
  z = ( z ^ ( z >> 30 ) ) * 0xbf58476d1ce4e5b9ull;
  z = ( z ^ ( z >> 27 ) ) * 0x94d049bb133111ebull;
  return z ^ ( z >> 31 );
}

/*! \brief Uniform double in [0, 1). */
inline double uniform01( rng_engine& rng )
{
  return static_cast<double>( rng() >> 11 ) * 0x1.0p-53;
}

inline double uniform( rng_engine& rng, double lo, double hi )
{
  return lo + ( hi - lo ) * uniform01( rng );
}

/*! \brief Uniform integer in [0, n). */
inline std::uint64_t uniform_index( rng_engine& rng, std::uint64_t n )
{
  auto const limit = ~std::uint64_t{ 0 } - ( ~std::uint64_t{ 0 } % n );
  std::uint64_t x;
  do
  {
    x = rng();
  } while ( x >= limit );
  return x % n;
}

inline double standard_normal( rng_engine& rng )
{
  double u1;
  do
  {
    u1 = uniform01( rng );
  } while ( u1 <= 0.0 );
  auto const u2 = uniform01( rng );
  return std::sqrt( -2.0 * std::log( u1 ) ) * std::cos( 2.0 * std::numbers::pi * u2 );
}

/*! \brief Fisher-Yates shuffle with the portable index draw. */
template<typename T>
void shuffle( std::vector<T>& v, rng_engine& rng )
{
  for ( std::size_t k = v.size(); k > 1u; --k )
  {
    auto const j = static_cast<std::size_t>( uniform_index( rng, k ) );
    std::swap( v[k - 1u], v[j] );
  }
}

} // namespace gatekit
