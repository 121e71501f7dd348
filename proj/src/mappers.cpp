#include "decloud/mappers.hpp"

#include <memory>

#include "decloud/bytes.hpp"

namespace decloud {

// Directory block 0..N holds packed entries, each
//   u16 name_len | name | u64 de | u64 size_blocks
// terminated by a zero name_len. The allocator DE keeps the next free
// DE id as a big-endian u64 at offset 0.

Bytes UfsMount::pack_dir(const std::vector<DirEntry>& entries) {
  ByteWriter w;
  for (const auto& e : entries) {
    w.u16(static_cast<uint16_t>(e.name.size()));
    w.raw(reinterpret_cast<const uint8_t*>(e.name.data()), e.name.size());
    w.u64(e.de);
    w.u64(e.size_blocks);
  }
  w.u16(0);
  return std::move(w).take();
}

std::vector<UfsMount::DirEntry> UfsMount::parse_dir(const Bytes& raw) {
  std::vector<DirEntry> out;
  ByteReader r(raw.data(), raw.size());
  for (;;) {
    uint16_t len = r.u16();
    if (!r.ok() || len == 0) break;
    DirEntry e;
    e.name.resize(len);
    r.raw(reinterpret_cast<uint8_t*>(e.name.data()), len);
    e.de = r.u64();
    e.size_blocks = r.u64();
    if (!r.ok()) break;
    out.push_back(std::move(e));
  }
  return out;
}

void UfsMount::load_dir(std::function<void(Errc, std::vector<DirEntry>)> cb) {
  dev_.submit_read(kDirDe, 0, static_cast<uint32_t>(kDirBlocks * kBlockSize),
                   [cb = std::move(cb)](Errc e, Bytes raw) {
                     if (e != Errc::ok) {
                       cb(e, {});
                       return;
                     }
                     cb(Errc::ok, parse_dir(raw));
                   });
}

void UfsMount::store_dir(const std::vector<DirEntry>& entries,
                         std::function<void(Errc)> cb) {
  Bytes packed = pack_dir(entries);
  if (packed.size() > kDirBlocks * kBlockSize) {
    cb(Errc::out_of_range);
    return;
  }
  dev_.submit_write(kDirDe, 0, std::move(packed), std::move(cb));
}

void UfsMount::format(std::function<void(Errc)> cb) {
  auto shared = std::make_shared<std::function<void(Errc)>>(std::move(cb));
  dev_.submit_create(kAllocDe, kAllocBlocks, [this, shared](Errc e) {
    if (e != Errc::ok) {
      (*shared)(e);
      return;
    }
    dev_.submit_create(kDirDe, kDirBlocks, [this, shared](Errc e2) {
      if (e2 != Errc::ok) {
        (*shared)(e2);
        return;
      }
      ByteWriter w;
      w.u64(kFirstFileDe);
      dev_.submit_write(kAllocDe, 0, std::move(w).take(),
                        [shared](Errc e3) { (*shared)(e3); });
    });
  });
}

void UfsMount::create(const std::string& name, uint64_t size_blocks,
                      std::function<void(Errc, DeId)> cb) {
  auto done = std::make_shared<std::function<void(Errc, DeId)>>(std::move(cb));
  load_dir([this, name, size_blocks, done](Errc e,
                                           std::vector<DirEntry> entries) {
    if (e != Errc::ok) {
      (*done)(e, 0);
      return;
    }
    for (const auto& en : entries) {
      if (en.name == name) {
        (*done)(Errc::name_exists, 0);
        return;
      }
    }
    // Bump the allocator, then create the file DE and publish its name.
    dev_.submit_read(kAllocDe, 0, 8, [this, name, size_blocks, done,
                                      entries](Errc e2, Bytes ctr) mutable {
      if (e2 != Errc::ok) {
        (*done)(e2, 0);
        return;
      }
      ByteReader r(ctr.data(), ctr.size());
      DeId id = r.u64();
      if (id < kFirstFileDe) id = kFirstFileDe;
      ByteWriter w;
      w.u64(id + 1);
      dev_.submit_write(
          kAllocDe, 0, std::move(w).take(),
          [this, name, size_blocks, done, entries, id](Errc e3) mutable {
            if (e3 != Errc::ok) {
              (*done)(e3, 0);
              return;
            }
            dev_.submit_create(
                id, size_blocks,
                [this, name, size_blocks, done, entries, id](Errc e4) mutable {
                  if (e4 != Errc::ok) {
                    (*done)(e4, 0);
                    return;
                  }
                  entries.push_back(DirEntry{name, id, size_blocks});
                  store_dir(entries, [this, name, done, id](Errc e5) {
                    if (e5 != Errc::ok) {
                      (*done)(e5, 0);
                      return;
                    }
                    cache_[name] = id;
                    (*done)(Errc::ok, id);
                  });
                });
          });
    });
  });
}

void UfsMount::resolve(const std::string& name,
                       std::function<void(Errc, DeId)> cb) {
  auto it = cache_.find(name);
  if (it != cache_.end()) {
    cb(Errc::ok, it->second);
    return;
  }
  load_dir([this, name, cb = std::move(cb)](Errc e,
                                            std::vector<DirEntry> entries) {
    if (e != Errc::ok) {
      cb(e, 0);
      return;
    }
    for (const auto& en : entries) {
      if (en.name == name) {
        cache_[name] = en.de;
        cb(Errc::ok, en.de);
        return;
      }
    }
    cb(Errc::name_not_found, 0);
  });
}

void UfsMount::write(const std::string& name, uint64_t off, Bytes data,
                     std::function<void(Errc)> cb) {
  auto payload = std::make_shared<Bytes>(std::move(data));
  resolve(name, [this, off, payload, cb = std::move(cb)](Errc e, DeId de) {
    if (e != Errc::ok) {
      cb(e);
      return;
    }
    dev_.submit_write(de, off, std::move(*payload), cb);
  });
}

void UfsMount::read(const std::string& name, uint64_t off, uint32_t len,
                    std::function<void(Errc, Bytes)> cb) {
  resolve(name, [this, off, len, cb = std::move(cb)](Errc e, DeId de) {
    if (e != Errc::ok) {
      cb(e, {});
      return;
    }
    dev_.submit_read(de, off, len, cb);
  });
}

void UfsMount::remove(const std::string& name, std::function<void(Errc)> cb) {
  auto done = std::make_shared<std::function<void(Errc)>>(std::move(cb));
  load_dir([this, name, done](Errc e, std::vector<DirEntry> entries) {
    if (e != Errc::ok) {
      (*done)(e);
      return;
    }
    std::vector<DirEntry> kept;
    bool found = false;
    for (auto& en : entries) {
      if (en.name == name) {
        found = true;
      } else {
        kept.push_back(std::move(en));
      }
    }
    if (!found) {
      (*done)(Errc::name_not_found);
      return;
    }
    store_dir(kept, [this, name, done](Errc e2) {
      if (e2 == Errc::ok) cache_.erase(name);
      (*done)(e2);
    });
  });
}

}  // namespace decloud
