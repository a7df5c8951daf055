#include "skeletor/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "skeletor/error.hpp"

namespace skeletor {

namespace {

constexpr std::array<char, 8> kMagic = {'S', 'K', 'L', 'T', 'C', 'K', 'P', 'T'};

template <typename U>
void put_le(std::ostream& out, U value) {
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i)
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  out.write(bytes, sizeof(U));
}

template <typename U>
U get_le(std::istream& in) {
  unsigned char bytes[sizeof(U)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(U));
  require(static_cast<bool>(in), ErrorKind::parse, "truncated checkpoint");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

std::string get_string(std::istream& in, std::size_t n) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  require(static_cast<bool>(in), ErrorKind::parse, "truncated checkpoint");
  return s;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.metadata_json.size()));
  out.write(checkpoint.metadata_json.data(),
            static_cast<std::streamsize>(checkpoint.metadata_json.size()));
  put_le<std::uint64_t>(out, checkpoint.parameters.size());
  for (const NamedTensor& p : checkpoint.parameters) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) put_le<std::uint64_t>(out, d);
    for (double v : p.value.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  require(static_cast<bool>(out), ErrorKind::io, "failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  require(static_cast<bool>(in) && magic == kMagic, ErrorKind::parse,
          "not a checkpoint file (bad magic)");
  const auto version = get_le<std::uint32_t>(in);
  require(version == kCheckpointVersion, ErrorKind::parse,
          "unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.metadata_json = get_string(in, get_le<std::uint32_t>(in));
  const auto count = get_le<std::uint64_t>(in);
  for (std::uint64_t k = 0; k < count; ++k) {
    NamedTensor p;
    p.name = get_string(in, get_le<std::uint32_t>(in));
    const auto rank = get_le<std::uint32_t>(in);
    require(rank <= 8, ErrorKind::parse, "implausible tensor rank in checkpoint");
    Shape shape(rank);
    for (auto& d : shape) d = get_le<std::uint64_t>(in);
    std::vector<double> data(shape_size(shape));
    for (double& v : data) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
    p.value = Tensor(std::move(shape), std::move(data));
    ck.parameters.push_back(std::move(p));
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::io, "cannot open " + path.string() + " for writing");
  write_checkpoint(out, checkpoint);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace skeletor
