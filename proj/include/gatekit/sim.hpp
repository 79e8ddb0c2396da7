/*!
  \file sim.hpp
  \brief Bit-parallel simulation producing incomplete truth tables.
*/

#pragma once

#include "gatekit/aig.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gatekit
{

struct sim_config
{
  std::size_t num_patterns{ 15000u };
  std::uint64_t seed{ 0u };
};

/*! \brief Bit-packed responses of one node; bit k is the value under pattern k.

  Bits past `num_bits()` in the final word are always zero.
*/
class signature
{
public:
  signature() = default;
  explicit signature( std::size_t num_bits );

  /*! \brief Adopt `words`; trailing words past ceil(num_bits/64) must be zero. */
  signature( std::vector<std::uint64_t> words, std::size_t num_bits );

  std::size_t num_bits() const noexcept { return num_bits_; }
  std::size_t num_words() const noexcept { return words_.size(); }
  std::span<std::uint64_t const> words() const noexcept { return words_; }
  std::span<std::uint64_t> words() noexcept { return words_; }

  /*! \brief Valid-bit mask of the last word that carries patterns. */
  std::uint64_t tail_mask() const noexcept;

  bool bit( std::size_t k ) const { return ( words_.at( k >> 6 ) >> ( k & 63u ) ) & 1u; }
  void set_bit( std::size_t k, bool value );

  /*! \brief Append one pattern bit, growing by a word when needed. */
  void push_back( bool value );

  /*! \brief Clear every bit beyond `num_bits()`. */
  void mask_tail() noexcept;

  std::size_t popcount() const noexcept;

  friend bool operator==( signature const& a, signature const& b ) noexcept;

private:
  std::vector<std::uint64_t> words_;
  std::size_t num_bits_{ 0u };
};

/*! \brief Independent fair-coin patterns, deterministic in (num_pi, seed, P). */
std::vector<signature> random_patterns( std::size_t num_pi, sim_config const& config );

/*! \brief All 2^num_pi patterns; PI k toggles with period 2^(k+1). */
std::vector<signature> exhaustive_patterns( std::size_t num_pi );

/*! \brief Exhaustive patterns when 2^num_pi <= P, random ones otherwise. */
std::vector<signature> input_patterns( std::size_t num_pi, sim_config const& config );

/*! \brief Simulate every node. `num_threads` > 1 splits the word range. */
std::vector<signature> simulate( aig const& g, std::span<signature const> pi_signatures, unsigned num_threads = 1u );

double logic_prob( signature const& sig ) noexcept;

/*! \brief Normalized Hamming distance. */
double tt_distance( signature const& a, signature const& b );
std::size_t hamming_distance( signature const& a, signature const& b );

} // namespace gatekit
