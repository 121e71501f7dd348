#pragma once

#include <string>

#include "decloud/device.hpp"

namespace decloud {

// Raw volume on a single DE: a linear byte range, block-addressed.
class UbdVolume {
 public:
  UbdVolume(Device& dev, DeId de, uint64_t blocks)
      : dev_(dev), de_(de), blocks_(blocks) {}

  DeId de() const { return de_; }
  uint64_t blocks() const { return blocks_; }

  void format(std::function<void(Errc)> cb) {
    dev_.submit_create(de_, blocks_, std::move(cb));
  }
  void read(uint64_t addr, uint32_t len, std::function<void(Errc, Bytes)> cb) {
    dev_.submit_read(de_, addr, len, std::move(cb));
  }
  void write(uint64_t addr, Bytes data, std::function<void(Errc)> cb) {
    dev_.submit_write(de_, addr, std::move(data), std::move(cb));
  }

 private:
  Device& dev_;
  DeId de_;
  uint64_t blocks_;
};

// File namespace over many DEs: an allocator DE handing out DE ids, a
// directory DE mapping names to file DEs, and one DE per file. Writes to
// different files never share a lease; only namespace changes touch the
// directory.
class UfsMount {
 public:
  static constexpr DeId kAllocDe = 1;
  static constexpr DeId kDirDe = 2;
  static constexpr uint64_t kAllocBlocks = 1;
  static constexpr uint64_t kDirBlocks = 4;
  static constexpr DeId kFirstFileDe = 3;

  explicit UfsMount(Device& dev) : dev_(dev) {}

  // Create the allocator and directory DEs; call once per namespace.
  void format(std::function<void(Errc)> cb);
  void create(const std::string& name, uint64_t size_blocks,
              std::function<void(Errc, DeId)> cb);
  void resolve(const std::string& name, std::function<void(Errc, DeId)> cb);
  void write(const std::string& name, uint64_t off, Bytes data,
             std::function<void(Errc)> cb);
  void read(const std::string& name, uint64_t off, uint32_t len,
            std::function<void(Errc, Bytes)> cb);
  // Drops the name; the file's DE is left orphaned on purpose.
  void remove(const std::string& name, std::function<void(Errc)> cb);

  void drop_cache() { cache_.clear(); }

 private:
  struct DirEntry {
    std::string name;
    DeId de = 0;
    uint64_t size_blocks = 0;
  };

  void load_dir(std::function<void(Errc, std::vector<DirEntry>)> cb);
  void store_dir(const std::vector<DirEntry>& entries,
                 std::function<void(Errc)> cb);
  static Bytes pack_dir(const std::vector<DirEntry>& entries);
  static std::vector<DirEntry> parse_dir(const Bytes& raw);

  Device& dev_;
  std::map<std::string, DeId> cache_;
};

}  // namespace decloud
