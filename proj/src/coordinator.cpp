#include "decloud/coordinator.hpp"

namespace decloud {

Coordinator::Coordinator(SimWorld& sim, SigScheme scheme)
    : sim_(sim), scheme_(scheme) {}

void Coordinator::register_device(DeviceId id, VDuration heartbeat_period) {
  devices_[id].period = heartbeat_period;
  devices_[id].last_seen = sim_.now();
}

void Coordinator::register_de(DeId de, DeviceId creator,
                              uint64_t size_blocks) {
  DeState& st = des_[de];
  if (st.holder == 0) st.holder = creator;
  st.size_blocks = size_blocks;
}

SeqNo Coordinator::head(DeId de) const {
  auto it = des_.find(de);
  return it == des_.end() ? 0 : it->second.updates.size();
}

DeviceId Coordinator::recorded_holder(DeId de) const {
  auto it = des_.find(de);
  return it == des_.end() ? 0 : it->second.holder;
}

const std::vector<Update>* Coordinator::log(DeId de) const {
  auto it = des_.find(de);
  return it == des_.end() ? nullptr : &it->second.updates;
}

std::vector<DeId> Coordinator::de_ids() const {
  std::vector<DeId> out;
  for (const auto& [de, st] : des_) out.push_back(de);
  return out;
}

bool Coordinator::device_suspect(DeviceId id) const {
  auto it = devices_.find(id);
  if (it == devices_.end()) return false;
  return sim_.now() > it->second.last_seen + 2 * it->second.period;
}

void Coordinator::seed_update(const Update& u) {
  DeState& st = des_[u.de];
  store_update(st, u);
}

void Coordinator::on_crash() {
  // Logs and the device table are durable; only switch handshakes are lost.
  for (auto& [de, st] : des_) {
    st.switch_requester = 0;
    st.revocation_sent = 0;
  }
}

void Coordinator::attach_buffered(DeState& st, Update& w) {
  auto it = st.buffered.find({w.block, w.version});
  if (it == st.buffered.end()) return;
  for (const auto& a : it->second)
    if (!w.has_replica(a.replicator)) w.attachments.push_back(a);
  st.buffered.erase(it);
}

void Coordinator::store_update(DeState& st, Update u) {
  if (u.kind == UpdateKind::REPLICATION) {
    Attachment a{u.replicator, u.signer, u.sig};
    for (Update& w : st.updates) {
      if (w.kind == UpdateKind::WRITE && w.block == u.block &&
          w.version == u.version) {
        if (!w.has_replica(a.replicator)) w.attachments.push_back(a);
        return;
      }
    }
    st.buffered[{u.block, u.version}].push_back(a);
    return;
  }
  if (u.kind == UpdateKind::LEASE_HOLDER) {
    st.holder = u.new_lh;
    st.switch_requester = 0;
    st.revocation_sent = 0;
    if (u.new_lh != u.old_lh)
      sim_.metrics().traffic[u.new_lh].lease_switches++;
  }
  u.attachments.clear();
  if (u.kind == UpdateKind::WRITE) attach_buffered(st, u);
  sim_.oracle().record_distributed(u);
  st.updates.push_back(std::move(u));
}

bool Coordinator::holder_suspect(const DeState& st) {
  if (st.holder == 0) return true;
  if (device_suspect(st.holder)) return true;
  // A revocation nobody answered for two of the holder's heartbeat periods
  // is as good as a missed heartbeat.
  if (st.switch_requester != 0 && st.revocation_sent != 0) {
    auto it = devices_.find(st.holder);
    VDuration period = it == devices_.end() ? 0 : it->second.period;
    if (period != 0 && sim_.now() > st.revocation_sent + 2 * period)
      return true;
  }
  return false;
}

void Coordinator::serve_one(DeviceId to, const Update& u) {
  Message m = Message::from_update(u);
  sim_.send(kCoordinatorId, to, std::move(m));
}

void Coordinator::serve_fetch(DeviceId to, DeId de, SeqNo since) {
  auto it = des_.find(de);
  if (it == des_.end()) return;
  DeState& st = it->second;

  SeqNo limit = st.updates.size();
  auto trunc = adversary_.truncate_at.find(de);
  if (trunc != adversary_.truncate_at.end())
    limit = std::min<SeqNo>(limit, trunc->second);

  const std::map<SeqNo, Update>* alt = nullptr;
  auto vic = adversary_.equivocate.find(to);
  if (vic != adversary_.equivocate.end()) {
    auto dit = vic->second.find(de);
    if (dit != vic->second.end()) alt = &dit->second;
  }

  for (SeqNo s = since + 1; s <= limit; ++s) {
    if (adversary_.omit_updates.count({de, s})) continue;
    const Update* u = &st.updates[s - 1];
    if (alt) {
      auto ait = alt->find(s);
      if (ait != alt->end()) u = &ait->second;
    }
    serve_one(to, *u);
    if (u->kind != UpdateKind::WRITE) continue;
    for (const auto& a : u->attachments)
      serve_one(to, attachment_to_update(de, u->block, u->version, a));
    if (adversary_.forge_replication &&
        !u->has_replica(adversary_.forge_replicator)) {
      Update forged;
      forged.kind = UpdateKind::REPLICATION;
      forged.de = de;
      forged.block = u->block;
      forged.version = u->version;
      forged.replicator = adversary_.forge_replicator;
      forged.signer = adversary_.forge_replicator;
      forged.sig.assign(signature_size(scheme_), 0xEE);
      serve_one(to, forged);
    }
  }
}

void Coordinator::handle_update(DeviceId from, const Message& m) {
  Update u = m.to_update();
  auto it = des_.find(u.de);
  if (it == des_.end()) {
    Message rej;
    rej.kind = MsgKind::UPDATE_REJECT;
    rej.de = u.de;
    rej.sender = kCoordinatorId;
    rej.body = UpdateRejectBody{u.seq, kRejectUnknownDe};
    sim_.send(kCoordinatorId, from, std::move(rej));
    return;
  }
  DeState& st = it->second;

  if (u.kind == UpdateKind::REPLICATION) {
    // Not seq-bearing and not holder-gated; store and stay quiet.
    store_update(st, std::move(u));
    return;
  }

  auto reject = [&](uint8_t reason) {
    Message rej;
    rej.kind = MsgKind::UPDATE_REJECT;
    rej.de = u.de;
    rej.sender = kCoordinatorId;
    rej.body = UpdateRejectBody{u.seq, reason};
    sim_.send(kCoordinatorId, from, std::move(rej));
  };

  bool entitled = u.signer == st.holder;
  if (!entitled && u.kind == UpdateKind::LEASE_HOLDER &&
      u.signer == u.new_lh && u.old_lh == st.holder && holder_suspect(st))
    entitled = true;  // recovery takeover of a dead holder's lease
  if (!entitled) {
    reject(kRejectNotLeaseHolder);
    return;
  }

  SeqNo head = st.updates.size();
  if (u.seq == 0 || u.seq > head + 1) {
    reject(kRejectBadSeq);
    return;
  }
  if (u.seq <= head) {
    // Resend of a slot we already hold. The stored entry wins; a resend with
    // different content is a forked history and gets bounced.
    if (canonical_signed_bytes(st.updates[u.seq - 1]) !=
        canonical_signed_bytes(u)) {
      reject(kRejectBadSeq);
      return;
    }
  } else {
    store_update(st, std::move(u));
  }

  Message ack;
  ack.kind = MsgKind::UPDATE_ACK;
  ack.de = m.de;
  ack.sender = kCoordinatorId;
  ack.body = SeqBody{static_cast<SeqNo>(st.updates.size())};
  sim_.send(kCoordinatorId, from, std::move(ack));
}

void Coordinator::handle_switch(DeviceId from, DeId de) {
  auto replyWith = [&](SwitchStatus s, SeqNo head) {
    Message r;
    r.kind = MsgKind::LH_SWITCH_REPLY;
    r.de = de;
    r.sender = kCoordinatorId;
    r.body = LhSwitchReplyBody{s, head};
    sim_.send(kCoordinatorId, from, std::move(r));
  };
  auto it = des_.find(de);
  if (it == des_.end()) {
    replyWith(SwitchStatus::unknown_de, 0);
    return;
  }
  DeState& st = it->second;
  SeqNo head = st.updates.size();
  if (st.holder == from) {
    st.switch_requester = 0;
    st.revocation_sent = 0;
    replyWith(SwitchStatus::still_holder, head);
    return;
  }
  if (holder_suspect(st)) {
    replyWith(SwitchStatus::recovery, head);
    return;
  }
  if (st.switch_requester != 0 && st.switch_requester != from) {
    replyWith(SwitchStatus::nack, head);
    return;
  }
  auto send_revocation = [&] {
    if (adversary_.drop_lh_revocations) return;
    Message rev;
    rev.kind = MsgKind::LH_REVOCATION;
    rev.de = de;
    rev.sender = kCoordinatorId;
    rev.body = LhRevocationBody{from};
    sim_.send(kCoordinatorId, st.holder, std::move(rev));
  };
  if (st.switch_requester == 0) {
    st.switch_requester = from;
    st.revocation_sent = sim_.now();
    send_revocation();
  } else {
    // Same requester asking again: the first revocation may have been lost.
    auto hit = devices_.find(st.holder);
    VDuration period = hit == devices_.end() ? 0 : hit->second.period;
    if (period != 0 && sim_.now() > st.revocation_sent + period)
      send_revocation();
  }
  replyWith(SwitchStatus::pending, head);
}

void Coordinator::on_message(DeviceId from, const Message& m) {
  switch (m.kind) {
    case MsgKind::HEARTBEAT: {
      auto it = devices_.find(from);
      if (it != devices_.end()) it->second.last_seen = sim_.now();
      Message ack;
      ack.kind = MsgKind::HEARTBEAT_ACK;
      ack.sender = kCoordinatorId;
      HeartbeatAckBody b;
      for (const auto& [de, st] : des_) b.des.push_back(de);
      ack.body = std::move(b);
      sim_.send(kCoordinatorId, from, std::move(ack));
      break;
    }
    case MsgKind::STATE_FETCH:
      serve_fetch(from, m.de, std::get<StateFetchBody>(m.body).since);
      break;
    case MsgKind::WRITE:
    case MsgKind::NOOP:
    case MsgKind::LEASE_HOLDER:
    case MsgKind::REPLICATION:
      handle_update(from, m);
      break;
    case MsgKind::LH_SWITCH:
      handle_switch(std::get<LhSwitchBody>(m.body).requester, m.de);
      break;
    case MsgKind::DEVTAB_FETCH: {
      Message r;
      r.kind = MsgKind::DEVTAB_REPLY;
      r.sender = kCoordinatorId;
      DevtabReplyBody b;
      for (const auto& [id, info] : devices_) {
        DevtabEntry e;
        e.device = id;
        e.status = device_suspect(id) ? kDevSuspectFailed : kDevOk;
        e.heartbeat_period = info.period;
        e.last_seen = info.last_seen;
        b.entries.push_back(e);
      }
      r.body = std::move(b);
      sim_.send(kCoordinatorId, from, std::move(r));
      break;
    }
    case MsgKind::DE_CREATE: {
      auto body = std::get<DeCreateBody>(m.body);
      uint8_t status = 0;
      auto it = des_.find(m.de);
      if (it != des_.end() && it->second.holder != from)
        status = 1;
      else
        register_de(m.de, from, body.blocks);
      Message r;
      r.kind = MsgKind::DE_CREATE_REPLY;
      r.de = m.de;
      r.sender = kCoordinatorId;
      r.body = StatusBody{status};
      sim_.send(kCoordinatorId, from, std::move(r));
      break;
    }
    case MsgKind::BLOCK_REQUEST: {
      // Control plane holds no blocks.
      auto b = std::get<BlockRequestBody>(m.body);
      Message r;
      r.kind = MsgKind::BLOCK_NACK;
      r.de = m.de;
      r.sender = kCoordinatorId;
      r.body = BlockNackBody{b.block, b.version};
      sim_.send(kCoordinatorId, from, std::move(r));
      break;
    }
    case MsgKind::PING: {
      Message r;
      r.kind = MsgKind::PING_REPLY;
      r.sender = kCoordinatorId;
      sim_.send(kCoordinatorId, from, std::move(r));
      break;
    }
    default:
      break;
  }
}

}  // namespace decloud
