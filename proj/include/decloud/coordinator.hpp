#pragma once

#include "decloud/sim.hpp"

namespace decloud {

// Provider-side misbehaviour, applied when serving state. The coordinator
// cannot sign as anyone, so every lie is either omission, reordering of
// history it was given, or garbage.
struct AdversaryPolicy {
  bool active() const {
    return !omit_updates.empty() || !truncate_at.empty() ||
           forge_replication || !equivocate.empty() || drop_lh_revocations;
  }
  // Skip these when serving fetches (introduces gaps).
  std::set<std::pair<DeId, SeqNo>> omit_updates;
  // Serve nothing past this seq per DE.
  std::map<DeId, SeqNo> truncate_at;
  // Invent replication records naming this device, with garbage signatures.
  bool forge_replication = false;
  DeviceId forge_replicator = 0;
  // victim -> de -> seq -> update served instead of the stored one.
  std::map<DeviceId, std::map<DeId, std::map<SeqNo, Update>>> equivocate;
  // Silently discard lease revocations instead of delivering them.
  bool drop_lh_revocations = false;
};

// The provider's control plane: device table, lease switching, and the
// per-DE update logs. Stores whatever validly-addressed updates arrive,
// verbatim, verifying nothing; honesty here is a liveness courtesy, not a
// trust assumption. All state except in-flight switches survives a crash.
class Coordinator : public Actor {
 public:
  Coordinator(SimWorld& sim, SigScheme scheme);

  void register_device(DeviceId id, VDuration heartbeat_period);
  // Pre-register a DE (seeded worlds); normal creation arrives as DE_CREATE.
  void register_de(DeId de, DeviceId creator, uint64_t size_blocks);

  AdversaryPolicy& adversary() { return adversary_; }

  SeqNo head(DeId de) const;
  DeviceId recorded_holder(DeId de) const;
  const std::vector<Update>* log(DeId de) const;
  std::vector<DeId> de_ids() const;
  bool device_suspect(DeviceId id) const;

  // Direct store for seeded worlds: bypasses the wire, keeps invariants.
  void seed_update(const Update& u);

  void on_message(DeviceId from, const Message& m) override;
  void on_crash() override;

 private:
  struct DeState {
    std::vector<Update> updates;  // seq i at index i-1; attachments inline
    std::map<std::pair<BlockId, VersionNo>, std::vector<Attachment>> buffered;
    DeviceId holder = 0;
    uint64_t size_blocks = 0;
    DeviceId switch_requester = 0;  // volatile
    VTime revocation_sent = 0;      // volatile
  };
  struct DevInfo {
    VDuration period = 0;
    VTime last_seen = 0;
  };

  void store_update(DeState& st, Update u);
  void attach_buffered(DeState& st, Update& w);
  bool holder_suspect(const DeState& st);
  void serve_fetch(DeviceId to, DeId de, SeqNo since);
  void serve_one(DeviceId to, const Update& u);
  void handle_update(DeviceId from, const Message& m);
  void handle_switch(DeviceId from, DeId de);

  SimWorld& sim_;
  SigScheme scheme_;
  std::map<DeId, DeState> des_;
  std::map<DeviceId, DevInfo> devices_;
  AdversaryPolicy adversary_;
};

}  // namespace decloud
