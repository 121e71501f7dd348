#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace decloud {

// Identifiers are plain 64-bit values on the wire; the aliases keep
// signatures readable.
using DeviceId = uint64_t;
using NodeId = uint64_t;
using DeId = uint64_t;
using BlockId = uint64_t;
using VersionNo = uint32_t;
using SeqNo = uint64_t;

// Virtual time in microseconds.
using VTime = uint64_t;
using VDuration = uint64_t;

constexpr VDuration kUsPerSec = 1'000'000;
constexpr VDuration kUsPerMs = 1'000;

constexpr size_t kBlockSize = 4096;

using Bytes = std::vector<uint8_t>;
using BlockData = std::array<uint8_t, kBlockSize>;

enum class Errc {
  ok = 0,
  unknown_signer,
  no_data_key,
  size_mismatch,
  conflicting_content,
  not_found,
  duplicate_block_version,
  duplicate_de,
  out_of_range,
  not_lease_holder,
  unknown_de,
  unknown_device,
  integrity_violation,
  unavailable,
  conflict_detected,
  name_exists,
  name_not_found,
  recovery_needed,
  human_intervention,
  disconnected,
  data_loss,
  invariant_violation,
};

const char* errc_name(Errc e);

// Protocol misbehaviour observable by an honest participant. Detections are
// recorded as events, never thrown: spotting an attack is a result.
enum class FaultKind : uint8_t {
  bad_signature,
  fork_detected,
  gap_detected,
  not_entitled,
  suspect_truncation,
  integrity_violation,
  conflict_detected,
};

inline const char* fault_kind_name(FaultKind k) {
  switch (k) {
    case FaultKind::bad_signature: return "bad_signature";
    case FaultKind::fork_detected: return "fork_detected";
    case FaultKind::gap_detected: return "gap_detected";
    case FaultKind::not_entitled: return "not_entitled";
    case FaultKind::suspect_truncation: return "suspect_truncation";
    case FaultKind::integrity_violation: return "integrity_violation";
    case FaultKind::conflict_detected: return "conflict_detected";
  }
  return "?";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

inline const char* errc_name(Errc e) {
  switch (e) {
    case Errc::ok: return "ok";
    case Errc::unknown_signer: return "unknown_signer";
    case Errc::no_data_key: return "no_data_key";
    case Errc::size_mismatch: return "size_mismatch";
    case Errc::conflicting_content: return "conflicting_content";
    case Errc::not_found: return "not_found";
    case Errc::duplicate_block_version: return "duplicate_block_version";
    case Errc::duplicate_de: return "duplicate_de";
    case Errc::out_of_range: return "out_of_range";
    case Errc::not_lease_holder: return "not_lease_holder";
    case Errc::unknown_de: return "unknown_de";
    case Errc::unknown_device: return "unknown_device";
    case Errc::integrity_violation: return "integrity_violation";
    case Errc::unavailable: return "unavailable";
    case Errc::conflict_detected: return "conflict_detected";
    case Errc::name_exists: return "name_exists";
    case Errc::name_not_found: return "name_not_found";
    case Errc::recovery_needed: return "recovery_needed";
    case Errc::human_intervention: return "human_intervention";
    case Errc::disconnected: return "disconnected";
    case Errc::data_loss: return "data_loss";
    case Errc::invariant_violation: return "invariant_violation";
  }
  return "?";
}

}  // namespace decloud
