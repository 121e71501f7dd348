#pragma once

#include <variant>

#include "decloud/update.hpp"

namespace decloud {

// Well-known node ids. Everything else (>= 10) is a user device.
inline constexpr DeviceId kCoordinatorId = 1;
inline constexpr DeviceId kCloudNodeId = 2;
inline constexpr DeviceId kFirstDeviceId = 10;

enum class MsgKind : uint32_t {
  STATE_FETCH = 1,
  BLOCK_REQUEST = 2,
  BLOCK_RESPONSE = 3,
  WRITE = 4,
  NOOP = 5,
  LEASE_HOLDER = 6,
  REPLICATION = 7,
  LH_SWITCH = 8,
  LH_REVOCATION = 9,
  LH_TRANSFER = 10,
  HEARTBEAT = 11,
  HEARTBEAT_ACK = 12,
  LH_SWITCH_REPLY = 13,
  UPDATE_ACK = 14,
  UPDATE_REJECT = 15,
  BLOCK_NACK = 16,
  DEVTAB_FETCH = 17,
  DEVTAB_REPLY = 18,
  DE_CREATE = 19,
  DE_CREATE_REPLY = 20,
  PING = 21,
  PING_REPLY = 22,
  RECOVERY_NOMINATE = 23,
};

const char* msg_kind_name(MsgKind k);

// Replies to a lease switch request.
enum class SwitchStatus : uint8_t {
  pending = 0,      // revocation under way; expect a transfer from the holder
  nack = 1,         // another switch is in flight; back off
  recovery = 2,     // recorded holder looks dead; run recovery
  unknown_de = 3,
  still_holder = 4, // requester already holds it
};

// UPDATE_REJECT reasons.
inline constexpr uint8_t kRejectNotLeaseHolder = 1;
inline constexpr uint8_t kRejectUnknownDe = 2;
inline constexpr uint8_t kRejectBadSeq = 3;

// Device-table entry status.
inline constexpr uint8_t kDevOk = 0;
inline constexpr uint8_t kDevSuspectFailed = 1;

struct StateFetchBody { SeqNo since = 0; };
struct BlockRequestBody { BlockId block = 0; VersionNo version = 0; };
struct BlockResponseBody {
  BlockId block = 0;
  VersionNo version = 0;
  BlockData content{};
};
// WRITE / NOOP / LEASE_HOLDER / REPLICATION all carry the update's signed
// fields plus its signature; WRITE additionally carries an unauthenticated
// replica-id hint.
struct UpdateBody {
  Update u;
  std::vector<DeviceId> replica_hint;  // WRITE only
};
struct LhSwitchBody { DeviceId requester = 0; };
struct LhRevocationBody { DeviceId new_holder = 0; };
struct LhTransferBody { SeqNo seq = 0; Bytes sig; };
struct EmptyBody {};
struct HeartbeatAckBody { std::vector<DeId> des; };
struct LhSwitchReplyBody {
  SwitchStatus status = SwitchStatus::pending;
  SeqNo head = 0;  // coordinator's log head, so a holder can resync
};
struct SeqBody { SeqNo seq = 0; };                       // UPDATE_ACK
struct UpdateRejectBody { SeqNo seq = 0; uint8_t reason = 0; };
struct BlockNackBody { BlockId block = 0; VersionNo version = 0; };
struct DevtabEntry {
  DeviceId device = 0;
  uint8_t status = kDevOk;
  VDuration heartbeat_period = 0;
  VTime last_seen = 0;
};
struct DevtabReplyBody { std::vector<DevtabEntry> entries; };
struct DeCreateBody { uint64_t blocks = 0; };
struct StatusBody { uint8_t status = 0; };               // DE_CREATE_REPLY
struct RecoveryNominateBody { DeviceId failed = 0; };

using MsgBody =
    std::variant<StateFetchBody, BlockRequestBody, BlockResponseBody,
                 UpdateBody, LhSwitchBody, LhRevocationBody, LhTransferBody,
                 EmptyBody, HeartbeatAckBody, LhSwitchReplyBody, SeqBody,
                 UpdateRejectBody, BlockNackBody, DevtabReplyBody,
                 DeCreateBody, StatusBody, RecoveryNominateBody>;

// One wire message. Header is fixed 24 bytes: kind(4) de(8) sender(8)
// body_len(4), big-endian. `sender` is the logical originator: for relayed
// updates it names the signer, not the relay hop.
struct Message {
  MsgKind kind = MsgKind::PING;
  DeId de = 0;
  DeviceId sender = 0;
  MsgBody body = EmptyBody{};

  static constexpr size_t kHeaderSize = 24;

  size_t wire_size() const { return kHeaderSize + body_size(); }
  size_t body_size() const;
  // Bytes of block payload carried (4096 + its 12-byte block header for a
  // BLOCK_RESPONSE, 0 otherwise); the rest of wire_size() is control.
  size_t block_bytes() const;

  Bytes encode() const;
  static Message decode(const Bytes& wire);  // throws Error on malformed input

  // Build a WRITE/NOOP/LEASE_HOLDER/REPLICATION message from a signed
  // update; hint defaults to the update's known replicas.
  static Message from_update(const Update& u);
  // Reconstruct the update (de/signer come from the header).
  Update to_update() const;
};

}  // namespace decloud
