#include "decloud/workload.hpp"

#include <cassert>

namespace decloud {

Bytes fill_bytes(uint64_t fill, size_t len) {
  Bytes out(len);
  uint64_t x = fill * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL;
  size_t i = 0;
  while (i < len) {
    x ^= x << 13;
    x ^= x >> 7;
    x ^= x << 17;
    uint64_t v = x;
    for (int k = 0; k < 8 && i < len; ++k, ++i) {
      out[i] = static_cast<uint8_t>(v >> (8 * k));
    }
  }
  return out;
}

BlockData fill_block(uint64_t fill) {
  Bytes b = fill_bytes(fill, kBlockSize);
  BlockData out;
  std::copy(b.begin(), b.end(), out.begin());
  return out;
}

void SequentialDriver::start() {
  if (started_) return;
  started_ = true;
  step();
}

void SequentialDriver::finish_op(Errc e) {
  if (e == Errc::ok) {
    stats_.ok++;
  } else {
    stats_.failed++;
    stats_.errors[e]++;
  }
  stats_.last_done = sim_.now();
  idx_++;
  if (e == Errc::ok) {
    step();
  } else {
    // Back off so a downed device does not spin the loop at zero cost.
    sim_.schedule(1'000'000, [this] { step(); });
  }
}

void SequentialDriver::step() {
  if (stopped_ || idx_ >= plan_.size()) return;
  auto& [dev, op] = plan_[idx_];
  switch (op.kind) {
    case OpRecord::Kind::create:
      dev->submit_create(op.de, op.addr, [this](Errc e) { finish_op(e); });
      break;
    case OpRecord::Kind::write:
      dev->submit_write(op.de, op.addr, fill_bytes(op.fill, op.len),
                        [this](Errc e) { finish_op(e); });
      break;
    case OpRecord::Kind::read: {
      Device* d = dev;
      const OpRecord* rec = &op;
      dev->submit_read(op.de, op.addr, op.len,
                       [this, d, rec](Errc e, Bytes data) {
                         if (e == Errc::ok && check_) {
                           check_(*d, *rec, data);
                           stats_.reads_checked++;
                         }
                         finish_op(e);
                       });
      break;
    }
  }
}

std::vector<std::pair<Device*, OpRecord>> plan_for(Device& dev,
                                                   std::vector<OpRecord> ops) {
  std::vector<std::pair<Device*, OpRecord>> out;
  out.reserve(ops.size());
  for (auto& op : ops) out.emplace_back(&dev, op);
  return out;
}

BlockData WorldSeeder::seeded_plain(DeId de, BlockId b) {
  return fill_block(de * 1000003ULL + b * 97ULL + 1);
}

SeededLog WorldSeeder::seed(const SeedSpec& spec) {
  std::vector<DeviceId> ids;
  ids.reserve(devices_.size());
  for (Device* d : devices_) ids.push_back(d->id());
  KeyRing wkeys = make_device_keyring(spec.writer, ids);

  coord_.register_de(spec.de, spec.writer, spec.blocks);

  SeededLog out;
  std::vector<Update>& log_updates = out.updates;
  std::vector<Update>& repl_updates = out.records;
  std::map<BlockId, BlockData> cipher;

  for (BlockId b = 0; b < spec.blocks; ++b) {
    BlockData plain = seeded_plain(spec.de, b);
    BlockData ct = encrypt_block(plain, spec.de, b, 1, wkeys);
    Digest20 h = content_hash({ct.data(), ct.size()});
    Digest20 ph = content_hash({plain.data(), plain.size()});
    cipher[b] = ct;

    Update u;
    u.kind = UpdateKind::WRITE;
    u.de = spec.de;
    u.seq = b + 1;
    u.block = b;
    u.version = 1;
    u.hash = h;
    u.signer = spec.writer;
    sign_update(u, scheme_, wkeys);
    log_updates.push_back(u);
    sim_.oracle().record_authored_block(spec.de, b, 1, h, ph, 0, spec.writer);

    for (DeviceId r : spec.replicators) {
      Update rr;
      rr.kind = UpdateKind::REPLICATION;
      rr.de = spec.de;
      rr.block = b;
      rr.version = 1;
      rr.replicator = r;
      rr.signer = r;
      sign_update(rr, scheme_, make_device_keyring(r, ids));
      repl_updates.push_back(rr);
    }
    if (cloud_ && spec.cloud_copy) {
      // The provider copy is attested by the writer, like a live fetch.
      Update cr;
      cr.kind = UpdateKind::REPLICATION;
      cr.de = spec.de;
      cr.block = b;
      cr.version = 1;
      cr.replicator = kCloudNodeId;
      cr.signer = spec.writer;
      sign_update(cr, scheme_, wkeys);
      repl_updates.push_back(cr);
    }
  }

  for (const Update& u : log_updates) coord_.seed_update(u);
  for (const Update& r : repl_updates) coord_.seed_update(r);

  for (Device* d : devices_) {
    bool skip = false;
    for (DeviceId s : spec.skip_log) skip = skip || s == d->id();
    if (skip) continue;
    DeLog& dl = d->log_mut().open(spec.de);
    for (const Update& u : log_updates) {
      IngestOutcome out = dl.ingest(u, scheme_, d->keys());
      assert(out.status == IngestOutcome::Status::applied);
      (void)out;
    }
    for (const Update& r : repl_updates) {
      dl.ingest_replication(r, scheme_, d->keys(), kCloudNodeId);
    }
    d->seed_acked(spec.de, spec.blocks);
    // The log names the writer as holder; leave the lease warm on it, as a
    // deployment that just wrote these blocks would be.
    if (d->id() == spec.writer) d->seed_lease_held(spec.de);
  }

  auto store_on = [&](Device* d) {
    for (auto& [b, ct] : cipher) {
      d->store_mut().put(spec.de, b, 1, ct);
      sim_.oracle().on_stored(d->id(), spec.de, b, 1, ct, true, 0,
                              sim_.metrics());
    }
  };
  for (Device* d : devices_) {
    bool holds = d->id() == spec.writer;
    for (DeviceId r : spec.replicators) holds = holds || r == d->id();
    if (holds) store_on(d);
  }
  if (cloud_ && spec.cloud_copy) {
    for (auto& [b, ct] : cipher) {
      cloud_->store_mut().put(spec.de, b, 1, ct);
      sim_.oracle().on_stored(kCloudNodeId, spec.de, b, 1, ct, false, 0,
                              sim_.metrics());
    }
  }
  return out;
}

}  // namespace decloud
