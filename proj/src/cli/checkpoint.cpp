#include "diformer/cli/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "diformer/error.hpp"

namespace diformer {

namespace {

constexpr char kMagic[4] = {'D', 'I', 'F', 'M'};

template <typename UInt>
void put(std::string& out, UInt v) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_string(std::string& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out += s;
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  template <typename UInt>
  UInt get() {
    need(sizeof(UInt));
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= UInt(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += sizeof(UInt);
    return v;
  }

  std::string get_string() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::uint64_t n) const {
    if (n > data_.size() - pos_) throw CheckpointError("corrupt checkpoint: truncated");
  }
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model, const Config& config,
                     const Vocabulary& vocab) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  std::string text = render_config(config) + "vocab =";
  for (const auto& t : vocab.regular_tokens()) text += " " + t;
  text += '\n';
  put_string(out, text);
  put<std::uint64_t>(out, model.params().size());
  for (const auto& [name, p] : model.params()) {
    put_string(out, name);
    put<std::uint64_t>(out, p->shape().size());
    for (auto e : p->shape()) put<std::uint64_t>(out, static_cast<std::uint64_t>(e));
    const auto& v = p->value();
    for (Index i = 0; i < v.size(); ++i) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v.data()[i]));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot read checkpoint " + path.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  Reader r(buf.str());
  if (r.get_bytes(4) != std::string(kMagic, 4)) throw CheckpointError("corrupt checkpoint: bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw CheckpointError("unsupported version " + std::to_string(version));

  std::string text = r.get_string();
  std::vector<std::string> tokens;
  std::string config_text;
  {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.rfind("vocab =", 0) == 0) {
        tokens = split_tokens(std::string_view(line).substr(7));
      } else {
        config_text += line + '\n';
      }
    }
  }
  Config config;
  try {
    config = parse_config(config_text);
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
  }
  Vocabulary vocab = Vocabulary::from_tokens(tokens);

  ParameterMap<float> params;
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t t = 0; t < count; ++t) {
    std::string name = r.get_string();
    const auto rank = r.get<std::uint64_t>();
    if (rank > 8) throw CheckpointError("corrupt checkpoint: tensor " + name + " has rank " + std::to_string(rank));
    Shape shape;
    std::uint64_t n64 = 1;
    for (std::uint64_t d = 0; d < rank; ++d) {
      const auto e = r.get<std::uint64_t>();
      if (e > r.remaining() || (e > 0 && n64 > r.remaining() / e)) throw CheckpointError("corrupt checkpoint: truncated");
      n64 *= e;
      shape.push_back(static_cast<Index>(e));
    }
    if (n64 * 4 > r.remaining()) throw CheckpointError("corrupt checkpoint: truncated");
    const Index n = shape_numel(shape);
    Tensor<float> tensor(shape, true);
    auto& v = tensor.value();
    for (Index i = 0; i < n; ++i) v.data()[i] = std::bit_cast<float>(r.get<std::uint32_t>());
    params.emplace(std::move(name), make_var(std::move(tensor)));
  }
  if (!r.done()) throw CheckpointError("corrupt checkpoint: trailing bytes");
  try {
    Model<float> model(config.model, std::move(params));
    return Checkpoint{std::move(config), std::move(vocab), std::move(model)};
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
  }
}

}  // namespace diformer
