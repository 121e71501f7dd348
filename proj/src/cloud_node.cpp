#include "decloud/cloud_node.hpp"

#include <algorithm>

namespace decloud {

CloudNode::CloudNode(SimWorld& sim, VDuration tick_period)
    : sim_(sim), period_(tick_period) {}

void CloudNode::controller_start() {
  if (running_) return;
  running_ = true;
  epoch_++;
  uint64_t e = epoch_;
  sim_.schedule(1, [this, e] {
    if (running_ && epoch_ == e) tick();
  });
}

void CloudNode::controller_stop() {
  running_ = false;
  epoch_++;
}

void CloudNode::on_crash() {
  running_ = false;
  epoch_++;
  pull_attempts_.clear();
}

void CloudNode::on_restart() {
  running_ = true;
  epoch_++;
  uint64_t e = epoch_;
  sim_.schedule(1, [this, e] {
    if (running_ && epoch_ == e) tick();
  });
}

void CloudNode::note_source(DeMirror& mir, BlockId b, VersionNo v,
                            DeviceId who) {
  if (who < kFirstDeviceId) return;
  auto& srcs = mir.sources[{b, v}];
  if (std::find(srcs.begin(), srcs.end(), who) == srcs.end())
    srcs.push_back(who);
}

void CloudNode::tick() {
  if (!running_) return;

  Message hb;
  hb.kind = MsgKind::HEARTBEAT;
  hb.sender = kCloudNodeId;
  sim_.send(kCloudNodeId, kCoordinatorId, std::move(hb));

  for (auto& [de, mir] : mirror_) {
    Message f;
    f.kind = MsgKind::STATE_FETCH;
    f.de = de;
    f.sender = kCloudNodeId;
    f.body = StateFetchBody{
        mir.updates.empty() ? 0 : mir.updates.rbegin()->first};
    sim_.send(kCloudNodeId, kCoordinatorId, std::move(f));
  }

  // One request per missing version per tick, rotating through known
  // holders of the bytes until someone answers.
  for (auto& [de, mir] : mirror_) {
    for (auto& [seq, u] : mir.updates) {
      if (u.kind != UpdateKind::WRITE) continue;
      if (store_.has(de, u.block, u.version)) continue;
      std::vector<DeviceId> srcs;
      if (mir.holder >= kFirstDeviceId) srcs.push_back(mir.holder);
      if (u.signer >= kFirstDeviceId &&
          std::find(srcs.begin(), srcs.end(), u.signer) == srcs.end())
        srcs.push_back(u.signer);
      auto sit = mir.sources.find({u.block, u.version});
      if (sit != mir.sources.end())
        for (DeviceId r : sit->second)
          if (std::find(srcs.begin(), srcs.end(), r) == srcs.end())
            srcs.push_back(r);
      if (srcs.empty()) continue;
      int& attempts = pull_attempts_[{de, u.block, u.version}];
      DeviceId src = srcs[attempts % srcs.size()];
      attempts++;
      Message req;
      req.kind = MsgKind::BLOCK_REQUEST;
      req.de = de;
      req.sender = kCloudNodeId;
      req.body = BlockRequestBody{u.block, u.version};
      sim_.send(kCloudNodeId, src, std::move(req));
    }
  }

  uint64_t e = epoch_;
  sim_.schedule(period_, [this, e] {
    if (running_ && epoch_ == e) tick();
  });
}

void CloudNode::on_message(DeviceId from, const Message& m) {
  if (!running_) return;
  switch (m.kind) {
    case MsgKind::HEARTBEAT_ACK: {
      for (DeId de : std::get<HeartbeatAckBody>(m.body).des) mirror_[de];
      break;
    }
    case MsgKind::WRITE:
    case MsgKind::NOOP:
    case MsgKind::LEASE_HOLDER: {
      Update u = m.to_update();
      DeMirror& mir = mirror_[u.de];
      mir.updates[u.seq] = u;
      if (u.kind == UpdateKind::LEASE_HOLDER) mir.holder = u.new_lh;
      else if (mir.holder == 0 && u.seq == 1) mir.holder = u.signer;
      if (u.kind == UpdateKind::WRITE) {
        note_source(mir, u.block, u.version, u.signer);
        for (DeviceId r : std::get<UpdateBody>(m.body).replica_hint)
          note_source(mir, u.block, u.version, r);
      }
      break;
    }
    case MsgKind::REPLICATION: {
      Update u = m.to_update();
      note_source(mirror_[u.de], u.block, u.version, u.replicator);
      break;
    }
    case MsgKind::BLOCK_REQUEST: {
      auto& b = std::get<BlockRequestBody>(m.body);
      const BlockData* c =
          policy_.drop_blocks ? nullptr : store_.get(m.de, b.block, b.version);
      if (!c) {
        Message nack;
        nack.kind = MsgKind::BLOCK_NACK;
        nack.de = m.de;
        nack.sender = kCloudNodeId;
        nack.body = BlockNackBody{b.block, b.version};
        sim_.send(kCloudNodeId, from, std::move(nack));
        break;
      }
      BlockData out = *c;
      if (policy_.corrupt_blocks) out[0] ^= 0xFF;
      Message resp;
      resp.kind = MsgKind::BLOCK_RESPONSE;
      resp.de = m.de;
      resp.sender = kCloudNodeId;
      resp.body = BlockResponseBody{b.block, b.version, out};
      sim_.send(kCloudNodeId, from, std::move(resp));
      break;
    }
    case MsgKind::BLOCK_RESPONSE: {
      auto& b = std::get<BlockResponseBody>(m.body);
      if (!store_.put(m.de, b.block, b.version, b.content)) {
        store_.erase(m.de, b.block, b.version);
        store_.put(m.de, b.block, b.version, b.content);
      }
      sim_.oracle().on_stored(kCloudNodeId, m.de, b.block, b.version,
                              b.content, /*verified=*/false, sim_.now(),
                              sim_.metrics());
      break;
    }
    case MsgKind::PING: {
      Message r;
      r.kind = MsgKind::PING_REPLY;
      r.de = m.de;
      r.sender = kCloudNodeId;
      sim_.send(kCloudNodeId, from, std::move(r));
      break;
    }
    default:
      break;
  }
}

}  // namespace decloud
