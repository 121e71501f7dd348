#include "decloud/messages.hpp"

#include "decloud/bytes.hpp"

namespace decloud {

const char* msg_kind_name(MsgKind k) {
  switch (k) {
    case MsgKind::STATE_FETCH: return "STATE_FETCH";
    case MsgKind::BLOCK_REQUEST: return "BLOCK_REQUEST";
    case MsgKind::BLOCK_RESPONSE: return "BLOCK_RESPONSE";
    case MsgKind::WRITE: return "WRITE";
    case MsgKind::NOOP: return "NOOP";
    case MsgKind::LEASE_HOLDER: return "LEASE_HOLDER";
    case MsgKind::REPLICATION: return "REPLICATION";
    case MsgKind::LH_SWITCH: return "LH_SWITCH";
    case MsgKind::LH_REVOCATION: return "LH_REVOCATION";
    case MsgKind::LH_TRANSFER: return "LH_TRANSFER";
    case MsgKind::HEARTBEAT: return "HEARTBEAT";
    case MsgKind::HEARTBEAT_ACK: return "HEARTBEAT_ACK";
    case MsgKind::LH_SWITCH_REPLY: return "LH_SWITCH_REPLY";
    case MsgKind::UPDATE_ACK: return "UPDATE_ACK";
    case MsgKind::UPDATE_REJECT: return "UPDATE_REJECT";
    case MsgKind::BLOCK_NACK: return "BLOCK_NACK";
    case MsgKind::DEVTAB_FETCH: return "DEVTAB_FETCH";
    case MsgKind::DEVTAB_REPLY: return "DEVTAB_REPLY";
    case MsgKind::DE_CREATE: return "DE_CREATE";
    case MsgKind::DE_CREATE_REPLY: return "DE_CREATE_REPLY";
    case MsgKind::PING: return "PING";
    case MsgKind::PING_REPLY: return "PING_REPLY";
    case MsgKind::RECOVERY_NOMINATE: return "RECOVERY_NOMINATE";
  }
  return "?";
}

size_t Message::body_size() const {
  switch (kind) {
    case MsgKind::STATE_FETCH: return 8;
    case MsgKind::BLOCK_REQUEST: return 12;
    case MsgKind::BLOCK_RESPONSE: return 12 + kBlockSize;
    case MsgKind::WRITE: {
      const auto& b = std::get<UpdateBody>(body);
      return 8 + 4 + 8 + 20 + 2 + 8 * b.replica_hint.size() + b.u.sig.size();
    }
    case MsgKind::NOOP: return 8 + std::get<UpdateBody>(body).u.sig.size();
    case MsgKind::LEASE_HOLDER:
      return 8 + 8 + 8 + std::get<UpdateBody>(body).u.sig.size();
    case MsgKind::REPLICATION:
      return 8 + 4 + 8 + std::get<UpdateBody>(body).u.sig.size();
    case MsgKind::LH_SWITCH: return 8;
    case MsgKind::LH_REVOCATION: return 8;
    case MsgKind::LH_TRANSFER:
      return 8 + std::get<LhTransferBody>(body).sig.size();
    case MsgKind::HEARTBEAT: return 0;
    case MsgKind::HEARTBEAT_ACK:
      return 2 + 8 * std::get<HeartbeatAckBody>(body).des.size();
    case MsgKind::LH_SWITCH_REPLY: return 9;
    case MsgKind::UPDATE_ACK: return 8;
    case MsgKind::UPDATE_REJECT: return 9;
    case MsgKind::BLOCK_NACK: return 12;
    case MsgKind::DEVTAB_FETCH: return 0;
    case MsgKind::DEVTAB_REPLY:
      return 2 + 25 * std::get<DevtabReplyBody>(body).entries.size();
    case MsgKind::DE_CREATE: return 8;
    case MsgKind::DE_CREATE_REPLY: return 1;
    case MsgKind::PING: return 0;
    case MsgKind::PING_REPLY: return 0;
    case MsgKind::RECOVERY_NOMINATE: return 8;
  }
  return 0;
}

size_t Message::block_bytes() const {
  return kind == MsgKind::BLOCK_RESPONSE ? 12 + kBlockSize : 0;
}

Bytes Message::encode() const {
  ByteWriter w;
  w.u32(static_cast<uint32_t>(kind));
  w.u64(de);
  w.u64(sender);
  w.u32(static_cast<uint32_t>(body_size()));
  switch (kind) {
    case MsgKind::STATE_FETCH:
      w.u64(std::get<StateFetchBody>(body).since);
      break;
    case MsgKind::BLOCK_REQUEST: {
      const auto& b = std::get<BlockRequestBody>(body);
      w.u64(b.block);
      w.u32(b.version);
      break;
    }
    case MsgKind::BLOCK_RESPONSE: {
      const auto& b = std::get<BlockResponseBody>(body);
      w.u64(b.block);
      w.u32(b.version);
      w.raw(b.content.data(), b.content.size());
      break;
    }
    case MsgKind::WRITE: {
      const auto& b = std::get<UpdateBody>(body);
      w.u64(b.u.block);
      w.u32(b.u.version);
      w.u64(b.u.seq);
      w.raw(b.u.hash.data(), b.u.hash.size());
      w.u16(static_cast<uint16_t>(b.replica_hint.size()));
      for (DeviceId d : b.replica_hint) w.u64(d);
      w.raw(b.u.sig.data(), b.u.sig.size());
      break;
    }
    case MsgKind::NOOP: {
      const auto& b = std::get<UpdateBody>(body);
      w.u64(b.u.seq);
      w.raw(b.u.sig.data(), b.u.sig.size());
      break;
    }
    case MsgKind::LEASE_HOLDER: {
      const auto& b = std::get<UpdateBody>(body);
      w.u64(b.u.seq);
      w.u64(b.u.old_lh);
      w.u64(b.u.new_lh);
      w.raw(b.u.sig.data(), b.u.sig.size());
      break;
    }
    case MsgKind::REPLICATION: {
      const auto& b = std::get<UpdateBody>(body);
      w.u64(b.u.block);
      w.u32(b.u.version);
      w.u64(b.u.replicator);
      w.raw(b.u.sig.data(), b.u.sig.size());
      break;
    }
    case MsgKind::LH_SWITCH:
      w.u64(std::get<LhSwitchBody>(body).requester);
      break;
    case MsgKind::LH_REVOCATION:
      w.u64(std::get<LhRevocationBody>(body).new_holder);
      break;
    case MsgKind::LH_TRANSFER: {
      const auto& b = std::get<LhTransferBody>(body);
      w.u64(b.seq);
      w.raw(b.sig.data(), b.sig.size());
      break;
    }
    case MsgKind::HEARTBEAT:
    case MsgKind::DEVTAB_FETCH:
    case MsgKind::PING:
    case MsgKind::PING_REPLY:
      break;
    case MsgKind::HEARTBEAT_ACK: {
      const auto& b = std::get<HeartbeatAckBody>(body);
      w.u16(static_cast<uint16_t>(b.des.size()));
      for (DeId d : b.des) w.u64(d);
      break;
    }
    case MsgKind::LH_SWITCH_REPLY: {
      const auto& b = std::get<LhSwitchReplyBody>(body);
      w.u8(static_cast<uint8_t>(b.status));
      w.u64(b.head);
      break;
    }
    case MsgKind::UPDATE_ACK:
      w.u64(std::get<SeqBody>(body).seq);
      break;
    case MsgKind::UPDATE_REJECT: {
      const auto& b = std::get<UpdateRejectBody>(body);
      w.u64(b.seq);
      w.u8(b.reason);
      break;
    }
    case MsgKind::BLOCK_NACK: {
      const auto& b = std::get<BlockNackBody>(body);
      w.u64(b.block);
      w.u32(b.version);
      break;
    }
    case MsgKind::DEVTAB_REPLY: {
      const auto& b = std::get<DevtabReplyBody>(body);
      w.u16(static_cast<uint16_t>(b.entries.size()));
      for (const auto& e : b.entries) {
        w.u64(e.device);
        w.u8(e.status);
        w.u64(e.heartbeat_period);
        w.u64(e.last_seen);
      }
      break;
    }
    case MsgKind::DE_CREATE:
      w.u64(std::get<DeCreateBody>(body).blocks);
      break;
    case MsgKind::DE_CREATE_REPLY:
      w.u8(std::get<StatusBody>(body).status);
      break;
    case MsgKind::RECOVERY_NOMINATE:
      w.u64(std::get<RecoveryNominateBody>(body).failed);
      break;
  }
  return std::move(w).take();
}

namespace {

Bytes read_sig(ByteReader& r) {
  Bytes sig(r.remaining());
  r.raw(sig.data(), sig.size());
  return sig;
}

}  // namespace

Message Message::decode(const Bytes& wire) {
  ByteReader r(wire.data(), wire.size());
  Message m;
  m.kind = static_cast<MsgKind>(r.u32());
  m.de = r.u64();
  m.sender = r.u64();
  uint32_t body_len = r.u32();
  if (!r.ok() || body_len != r.remaining())
    throw Error(Errc::size_mismatch, "message header/body mismatch");
  switch (m.kind) {
    case MsgKind::STATE_FETCH:
      m.body = StateFetchBody{r.u64()};
      break;
    case MsgKind::BLOCK_REQUEST: {
      BlockRequestBody b;
      b.block = r.u64();
      b.version = r.u32();
      m.body = b;
      break;
    }
    case MsgKind::BLOCK_RESPONSE: {
      BlockResponseBody b;
      b.block = r.u64();
      b.version = r.u32();
      r.raw(b.content.data(), b.content.size());
      m.body = b;
      break;
    }
    case MsgKind::WRITE: {
      UpdateBody b;
      b.u.kind = UpdateKind::WRITE;
      b.u.de = m.de;
      b.u.signer = m.sender;
      b.u.block = r.u64();
      b.u.version = r.u32();
      b.u.seq = r.u64();
      r.raw(b.u.hash.data(), b.u.hash.size());
      uint16_t n = r.u16();
      for (uint16_t i = 0; i < n && r.ok(); ++i)
        b.replica_hint.push_back(r.u64());
      b.u.sig = read_sig(r);
      m.body = std::move(b);
      break;
    }
    case MsgKind::NOOP: {
      UpdateBody b;
      b.u.kind = UpdateKind::NOOP;
      b.u.de = m.de;
      b.u.signer = m.sender;
      b.u.seq = r.u64();
      b.u.sig = read_sig(r);
      m.body = std::move(b);
      break;
    }
    case MsgKind::LEASE_HOLDER: {
      UpdateBody b;
      b.u.kind = UpdateKind::LEASE_HOLDER;
      b.u.de = m.de;
      b.u.signer = m.sender;
      b.u.seq = r.u64();
      b.u.old_lh = r.u64();
      b.u.new_lh = r.u64();
      b.u.sig = read_sig(r);
      m.body = std::move(b);
      break;
    }
    case MsgKind::REPLICATION: {
      UpdateBody b;
      b.u.kind = UpdateKind::REPLICATION;
      b.u.de = m.de;
      b.u.signer = m.sender;
      b.u.block = r.u64();
      b.u.version = r.u32();
      b.u.replicator = r.u64();
      b.u.sig = read_sig(r);
      m.body = std::move(b);
      break;
    }
    case MsgKind::LH_SWITCH:
      m.body = LhSwitchBody{r.u64()};
      break;
    case MsgKind::LH_REVOCATION:
      m.body = LhRevocationBody{r.u64()};
      break;
    case MsgKind::LH_TRANSFER: {
      LhTransferBody b;
      b.seq = r.u64();
      b.sig = read_sig(r);
      m.body = std::move(b);
      break;
    }
    case MsgKind::HEARTBEAT:
    case MsgKind::DEVTAB_FETCH:
    case MsgKind::PING:
    case MsgKind::PING_REPLY:
      m.body = EmptyBody{};
      break;
    case MsgKind::HEARTBEAT_ACK: {
      HeartbeatAckBody b;
      uint16_t n = r.u16();
      for (uint16_t i = 0; i < n && r.ok(); ++i) b.des.push_back(r.u64());
      m.body = std::move(b);
      break;
    }
    case MsgKind::LH_SWITCH_REPLY: {
      LhSwitchReplyBody b;
      b.status = static_cast<SwitchStatus>(r.u8());
      b.head = r.u64();
      m.body = b;
      break;
    }
    case MsgKind::UPDATE_ACK:
      m.body = SeqBody{r.u64()};
      break;
    case MsgKind::UPDATE_REJECT: {
      UpdateRejectBody b;
      b.seq = r.u64();
      b.reason = r.u8();
      m.body = b;
      break;
    }
    case MsgKind::BLOCK_NACK: {
      BlockNackBody b;
      b.block = r.u64();
      b.version = r.u32();
      m.body = b;
      break;
    }
    case MsgKind::DEVTAB_REPLY: {
      DevtabReplyBody b;
      uint16_t n = r.u16();
      for (uint16_t i = 0; i < n && r.ok(); ++i) {
        DevtabEntry e;
        e.device = r.u64();
        e.status = r.u8();
        e.heartbeat_period = r.u64();
        e.last_seen = r.u64();
        b.entries.push_back(e);
      }
      m.body = std::move(b);
      break;
    }
    case MsgKind::DE_CREATE:
      m.body = DeCreateBody{r.u64()};
      break;
    case MsgKind::DE_CREATE_REPLY:
      m.body = StatusBody{r.u8()};
      break;
    case MsgKind::RECOVERY_NOMINATE:
      m.body = RecoveryNominateBody{r.u64()};
      break;
    default:
      throw Error(Errc::size_mismatch, "unknown message kind");
  }
  if (!r.ok() || r.remaining() != 0)
    throw Error(Errc::size_mismatch, "malformed message body");
  return m;
}

Message Message::from_update(const Update& u) {
  Message m;
  m.de = u.de;
  m.sender = u.signer;
  UpdateBody b;
  b.u = u;
  b.u.attachments.clear();
  switch (u.kind) {
    case UpdateKind::WRITE:
      m.kind = MsgKind::WRITE;
      b.replica_hint = u.replicas();
      break;
    case UpdateKind::NOOP:
      m.kind = MsgKind::NOOP;
      break;
    case UpdateKind::LEASE_HOLDER:
      m.kind = MsgKind::LEASE_HOLDER;
      break;
    case UpdateKind::REPLICATION:
      m.kind = MsgKind::REPLICATION;
      break;
  }
  m.body = std::move(b);
  return m;
}

Update Message::to_update() const {
  Update u = std::get<UpdateBody>(body).u;
  u.de = de;
  u.signer = sender;
  return u;
}

}  // namespace decloud
