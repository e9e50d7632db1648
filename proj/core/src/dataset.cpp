#include "dmimo/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dmimo {

void write_dataset(const std::string& path, const std::vector<ChannelInstance>& instances) {
  if (instances.empty()) throw std::invalid_argument("write_dataset: no instances");
  const int K = instances.front().num_users();
  const int M = instances.front().num_raus();
  for (const auto& inst : instances)
    if (inst.num_users() != K || inst.num_raus() != M)
      throw std::invalid_argument("write_dataset: instances must share one (K, M) shape");

  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_dataset: cannot open " + path);

  out << K << ' ' << M << '\n';
  char buf[64];
  for (const auto& inst : instances) {
    for (int k = 0; k < K; ++k) {
      for (int m = 0; m < M; ++m) {
        // %.17g round-trips doubles exactly.
        std::snprintf(buf, sizeof(buf), "%.17g", inst.gain(k, m));
        if (k != 0 || m != 0) out << ' ';
        out << buf;
      }
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_dataset: write failed for " + path);
}

std::vector<ChannelInstance> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_dataset: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_dataset: missing header");
  int K = 0, M = 0;
  {
    std::istringstream header(line);
    if (!(header >> K >> M) || K <= 0 || M <= 0)
      throw std::runtime_error("read_dataset: bad header '" + line + "'");
    std::string extra;
    if (header >> extra) throw std::runtime_error("read_dataset: trailing tokens in header");
  }

  std::vector<ChannelInstance> instances;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ChannelInstance inst;
    inst.gain.resize(K, M);
    std::istringstream row(line);
    for (int k = 0; k < K; ++k) {
      for (int m = 0; m < M; ++m) {
        if (!(row >> inst.gain(k, m)))
          throw std::runtime_error("read_dataset: line " + std::to_string(line_no) +
                                   " has fewer than K*M values");
      }
    }
    std::string extra;
    if (row >> extra)
      throw std::runtime_error("read_dataset: line " + std::to_string(line_no) +
                               " has more than K*M values");
    validate(inst);
    instances.push_back(std::move(inst));
  }
  return instances;
}

}  // namespace dmimo
