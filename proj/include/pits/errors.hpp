#pragma once

#include <stdexcept>
#include <string>

namespace pits {

enum class Err {
  invalid_params,
  offset_out_of_range,
  depth_out_of_range,
  tree_finalized,
  tree_pruned,
  duplicate_digest,
  unknown_log,
  malformed_receipt,
  branch_not_final,
  epoch_mismatch,
  update_inconsistent,
  wrong_length,
  already_finalized,
  unknown_device,
  unknown_epoch,
  epoch_finalized,
  epoch_not_ended,
  malformed_batch,
  invalid_transition,
  missing_boundary,
  clock_regression,
  transport_error,
  no_published_root,
  snapshot_unreadable,
  verification_failed,
  invalid_receipt,
  io_error,
};

constexpr const char* to_string(Err e) {
  switch (e) {
    case Err::invalid_params: return "InvalidParams";
    case Err::offset_out_of_range: return "OffsetOutOfRange";
    case Err::depth_out_of_range: return "DepthOutOfRange";
    case Err::tree_finalized: return "TreeFinalized";
    case Err::tree_pruned: return "TreePruned";
    case Err::duplicate_digest: return "DuplicateDigest";
    case Err::unknown_log: return "UnknownLog";
    case Err::malformed_receipt: return "MalformedReceipt";
    case Err::branch_not_final: return "BranchNotFinal";
    case Err::epoch_mismatch: return "EpochMismatch";
    case Err::update_inconsistent: return "UpdateInconsistent";
    case Err::wrong_length: return "WrongLength";
    case Err::already_finalized: return "AlreadyFinalized";
    case Err::unknown_device: return "UnknownDevice";
    case Err::unknown_epoch: return "UnknownEpoch";
    case Err::epoch_finalized: return "EpochFinalized";
    case Err::epoch_not_ended: return "EpochNotEnded";
    case Err::malformed_batch: return "MalformedBatch";
    case Err::invalid_transition: return "InvalidTransition";
    case Err::missing_boundary: return "MissingBoundary";
    case Err::clock_regression: return "ClockRegression";
    case Err::transport_error: return "TransportError";
    case Err::no_published_root: return "NoPublishedRoot";
    case Err::snapshot_unreadable: return "SnapshotUnreadable";
    case Err::verification_failed: return "VerificationFailed";
    case Err::invalid_receipt: return "InvalidReceipt";
    case Err::io_error: return "IoError";
  }
  return "UnknownError";
}

inline Err err_from_string(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(Err::io_error); ++i) {
    auto e = static_cast<Err>(i);
    if (s == to_string(e)) return e;
  }
  return Err::transport_error;
}

class Error : public std::runtime_error {
 public:
  explicit Error(Err code, const std::string& detail = "")
      : std::runtime_error(detail.empty() ? std::string(to_string(code))
                                          : std::string(to_string(code)) + ": " + detail),
        code_(code) {}

  Err code() const noexcept { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& detail = "") {
  throw Error(code, detail);
}

}  // namespace pits
