#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gatekit
{

/*! \brief Failure categories raised across the toolkit. */
enum class errc
{
  malformed_header,
  latches_unsupported,
  literal_out_of_range,
  cyclic_definition,
  constant_literal_unsupported,
  unknown_node,
  identical_nodes,
  signature_length_mismatch,
  io_failure,
  version_mismatch,
  checksum_mismatch,
  shape_mismatch,
  zero_vector_cosine,
  non_finite_input,
  non_scalar_loss,
  empty_message_list,
  uninitialized_pis,
  too_few_pairs,
  missing_labels,
  empty_corpus,
  divergence_detected,
  no_positive_pairs,
  malformed_clause,
  model_embedding_missing,
  incomplete_pattern,
  bad_config
};

std::string_view to_string( errc code ) noexcept;

class error : public std::runtime_error
{
public:
  error( errc code, std::string const& what )
      : std::runtime_error( std::string( to_string( code ) ) + ": " + what ), code_( code )
  {
  }

  errc code() const noexcept { return code_; }

private:
  errc code_;
};

} // namespace gatekit
