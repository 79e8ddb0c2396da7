#include "gatekit/error.hpp"

namespace gatekit
{

std::string_view to_string( errc code ) noexcept
{
  switch ( code )
  {
  case errc::malformed_header: return "MalformedHeader";
  case errc::latches_unsupported: return "LatchesUnsupported";
  case errc::literal_out_of_range: return "LiteralOutOfRange";
  case errc::cyclic_definition: return "CyclicDefinition";
  case errc::constant_literal_unsupported: return "ConstantLiteralUnsupported";
  case errc::unknown_node: return "UnknownNode";
  case errc::identical_nodes: return "IdenticalNodes";
  case errc::signature_length_mismatch: return "SignatureLengthMismatch";
  case errc::io_failure: return "IoFailure";
  case errc::version_mismatch: return "VersionMismatch";
  case errc::checksum_mismatch: return "ChecksumMismatch";
  case errc::shape_mismatch: return "ShapeMismatch";
  case errc::zero_vector_cosine: return "ZeroVectorCosine";
  case errc::non_finite_input: return "NonFiniteInput";
  case errc::non_scalar_loss: return "NonScalarLoss";
  case errc::empty_message_list: return "EmptyMessageList";
  case errc::uninitialized_pis: return "UninitializedPIs";
  case errc::too_few_pairs: return "TooFewPairs";
  case errc::missing_labels: return "MissingLabels";
  case errc::empty_corpus: return "EmptyCorpus";
  case errc::divergence_detected: return "DivergenceDetected";
  case errc::no_positive_pairs: return "NoPositivePairs";
  case errc::malformed_clause: return "MalformedClause";
  case errc::model_embedding_missing: return "ModelEmbeddingMissing";
  case errc::incomplete_pattern: return "IncompletePattern";
  case errc::bad_config: return "BadConfig";
  }
  return "Unknown";
}

} // namespace gatekit
