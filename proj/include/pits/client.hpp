#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pits/notary.hpp"

namespace pits {

/// Client side of the notary wire API. Implementations: in-process (below),
/// HTTP (http_api.hpp) and the fault-injecting wrapper in the scenario
/// runner. Failures surface as pits::Error with the server's error code;
/// transport trouble is Err::transport_error.
class NotaryClient {
 public:
  virtual ~NotaryClient() = default;

  virtual SubmitAck submit_batch(const LogBatch& batch) = 0;
  virtual SubmitAck start_epoch(const LogBatch& boundary_only) {
    return submit_batch(boundary_only);
  }
  virtual ReceiptResult get_receipt(const std::string& device, EpochId epoch,
                                    const Digest& log_digest,
                                    TimestampOffset ts) = 0;
  virtual ReceiptUpdate get_update(const std::string& device, EpochId epoch) = 0;
  virtual Digest get_root(const std::string& device, EpochId epoch) = 0;
  virtual AuditResult audit(const std::string& device, EpochId epoch,
                            std::span<const Digest> candidate_level) = 0;
  virtual std::vector<InconsistencyRecord> get_inconsistencies(
      const std::string& device, EpochId epoch) = 0;
};

class LocalClient final : public NotaryClient {
 public:
  explicit LocalClient(Notary& notary) : notary_(notary) {}

  SubmitAck submit_batch(const LogBatch& batch) override {
    return notary_.submit_batch(batch);
  }
  ReceiptResult get_receipt(const std::string& device, EpochId epoch,
                            const Digest& log_digest, TimestampOffset ts) override {
    return notary_.get_receipt(device, epoch, log_digest, ts);
  }
  ReceiptUpdate get_update(const std::string& device, EpochId epoch) override {
    return notary_.get_update(device, epoch);
  }
  Digest get_root(const std::string& device, EpochId epoch) override {
    return notary_.get_root(device, epoch);
  }
  AuditResult audit(const std::string& device, EpochId epoch,
                    std::span<const Digest> candidate_level) override {
    return notary_.audit(device, epoch, candidate_level);
  }
  std::vector<InconsistencyRecord> get_inconsistencies(const std::string& device,
                                                       EpochId epoch) override {
    return notary_.inconsistencies_for(device, epoch);
  }

 private:
  Notary& notary_;
};

}  // namespace pits
