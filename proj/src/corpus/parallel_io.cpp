#include "diformer/corpus/parallel_io.hpp"

#include <fstream>
#include <iostream>

#include "diformer/error.hpp"

namespace diformer {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  if (in.bad()) throw DataError("read error on " + path.string());
  return lines;
}

void write_lines(const std::filesystem::path& path, std::span<const std::string> lines) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw DataError("write error on " + path.string());
}

LoadedPairs load_parallel_file(const std::filesystem::path& src_path, const std::filesystem::path& tgt_path,
                               const Vocabulary& vocab, int max_seq_len) {
  const auto src = read_lines(src_path);
  const auto tgt = read_lines(tgt_path);
  if (src.size() != tgt.size()) {
    throw DataError("line count mismatch: " + src_path.string() + " has " + std::to_string(src.size()) + ", " +
                    tgt_path.string() + " has " + std::to_string(tgt.size()));
  }
  LoadedPairs out;
  for (std::size_t i = 0; i < src.size(); ++i) {
    ParallelPair p{vocab.encode(src[i]), vocab.encode(tgt[i])};
    if (static_cast<int>(p.src.size()) > max_seq_len || static_cast<int>(p.tgt.size()) > max_seq_len) {
      ++out.dropped;
      continue;
    }
    out.pairs.push_back(std::move(p));
  }
  if (out.dropped) {
    std::clog << "load_parallel_file: dropped " << out.dropped << " overlength pairs from " << src_path.string()
              << '\n';
  }
  return out;
}

void write_parallel_file(const std::filesystem::path& prefix, std::span<const ParallelPair> pairs,
                         const Vocabulary& vocab) {
  std::vector<std::string> src, tgt;
  src.reserve(pairs.size());
  tgt.reserve(pairs.size());
  for (const auto& p : pairs) {
    src.push_back(vocab.decode(p.src));
    tgt.push_back(vocab.decode(p.tgt));
  }
  auto with_ext = [&](const char* ext) {
    auto p = prefix;
    p += ext;
    return p;
  };
  write_lines(with_ext(".src"), src);
  write_lines(with_ext(".tgt"), tgt);
}

}  // namespace diformer
