#include <bit>
#include <cstdint>
#include <fstream>
#include <map>

#include "conad/errors.hpp"
#include "conad/models.hpp"

namespace conad {

namespace {

constexpr char kMagic[] = {'C', 'O', 'N', 'A', 'D', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(bytes, 8);
}

bool get_u64(std::istream& is, std::uint64_t& v) {
  unsigned char bytes[8];
  if (!is.read(reinterpret_cast<char*>(bytes), 8)) return false;
  v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return true;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamList& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint '" + path + "'");
  os.write(kMagic, sizeof(kMagic));
  for (const auto& p : params) {
    put_u64(os, p.name.size());
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const auto& shape = p.tensor->shape();
    put_u64(os, shape.size());
    for (auto d : shape) put_u64(os, d);
    for (double v : p.tensor->data()) put_u64(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw DataError("failed writing checkpoint '" + path + "'");
}

void load_checkpoint(const std::string& path, const ParamList& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint '" + path + "'");
  char magic[sizeof(kMagic)];
  if (!is.read(magic, sizeof(magic)) || !std::equal(std::begin(magic), std::end(magic), kMagic)) {
    throw DataError("'" + path + "' is not a checkpoint (bad magic)");
  }
  std::map<std::string, Tensor> stored;
  std::uint64_t name_len = 0;
  while (get_u64(is, name_len)) {
    if (name_len > 4096) throw DataError("corrupt checkpoint '" + path + "'");
    std::string name(name_len, '\0');
    std::uint64_t rank = 0;
    if (!is.read(name.data(), static_cast<std::streamsize>(name_len)) || !get_u64(is, rank) || rank > 8) {
      throw DataError("truncated checkpoint '" + path + "'");
    }
    Shape shape(rank);
    for (auto& d : shape) {
      std::uint64_t v = 0;
      if (!get_u64(is, v) || v == 0) throw DataError("corrupt checkpoint '" + path + "'");
      d = v;
    }
    std::vector<double> data(shape_size(shape));
    for (double& v : data) {
      std::uint64_t bits = 0;
      if (!get_u64(is, bits)) throw DataError("truncated checkpoint '" + path + "'");
      v = std::bit_cast<double>(bits);
    }
    stored.insert_or_assign(name, Tensor(std::move(shape), std::move(data)));
  }
  for (const auto& p : params) {
    auto it = stored.find(p.name);
    if (it == stored.end()) {
      throw ConfigError("checkpoint '" + path + "' has no tensor '" + p.name + "'");
    }
    if (it->second.shape() != p.tensor->shape()) {
      throw ConfigError("checkpoint tensor '" + p.name + "' has shape " + shape_string(it->second.shape()) +
                        ", model expects " + shape_string(p.tensor->shape()));
    }
  }
  for (const auto& p : params) *p.tensor = stored.at(p.name);
}

}  // namespace conad
