#include "relayopt/io.hpp"

#include <cstdio>
#include <sstream>

#include "relayopt/datagen.hpp"

namespace relayopt::io {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

namespace {

std::vector<double> split_doubles(const std::string& line, const std::string& context) {
  std::vector<double> out;
  std::istringstream ss(line);
  double v;
  while (ss >> v) out.push_back(v);
  if (!ss.eof()) throw ParseError("bad numeric field in " + context);
  return out;
}

std::ofstream open_out(const std::string& path, bool append = false) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw InputError("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open: " + path);
  return in;
}

}  // namespace

void write_deployments(const std::string& path, const std::vector<Deployment>& deps) {
  std::ofstream out = open_out(path);
  out << "relayopt-testset 1\n";
  for (size_t i = 0; i < deps.size(); ++i) {
    const Deployment& d = deps[i];
    out << i << " " << d.n() << " " << fmt17(d.jammer.x) << " " << fmt17(d.jammer.y);
    for (const auto& p : d.positions) out << " " << fmt17(p.x) << " " << fmt17(p.y);
    out << "\n";
  }
  if (!out) throw InputError("write failed: " + path);
}

std::vector<Deployment> read_deployments(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string header;
  std::getline(in, header);
  if (header != "relayopt-testset 1") throw ParseError("not a deployment file: " + path);

  std::vector<Deployment> deps;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_doubles(line, path);
    if (f.size() < 4) throw ParseError("truncated deployment record in " + path);
    const int n = static_cast<int>(f[1]);
    if (n < 2 || f.size() != 4 + 2 * static_cast<size_t>(n))
      throw ParseError("deployment record length mismatch in " + path);
    Deployment d;
    d.jammer = {f[2], f[3]};
    for (int i = 0; i < n; ++i) d.positions.push_back({f[4 + 2 * i], f[5 + 2 * i]});
    d.validate();
    deps.push_back(std::move(d));
  }
  return deps;
}

DatasetWriter::DatasetWriter(const std::string& path, bool append)
    : out_(open_out(path, append)), path_(path) {}

void DatasetWriter::append(const datagen::TrajectorySample& s) {
  const int n = s.dep.n();
  out_ << 1 << " " << s.deployment_id << " " << s.step << " " << fmt17(s.dep.jammer.x) << " "
       << fmt17(s.dep.jammer.y);
  for (const auto& p : s.dep.positions) out_ << " " << fmt17(p.x) << " " << fmt17(p.y);
  out_ << " " << fmt17(s.label);
  for (int r = 0; r < n - 2; ++r)
    out_ << " " << fmt17(s.directions.at(r, 0)) << " " << fmt17(s.directions.at(r, 1));
  out_ << " " << (s.valid_direction ? 1 : 0) << "\n";
  if (!out_) throw InputError("dataset write failed: " + path_);
}

std::vector<datagen::TrajectorySample> read_dataset(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<datagen::TrajectorySample> samples;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_doubles(line, path);
    // tokens = 4n + 7 for n nodes
    if (f.size() < 11 || (f.size() - 7) % 4 != 0) throw ParseError("bad dataset record in " + path);
    const int n = static_cast<int>((f.size() - 7) / 4) + 1;
    if (f[0] != 1.0) throw ParseError("unsupported dataset schema version in " + path);
    datagen::TrajectorySample s;
    s.deployment_id = static_cast<int>(f[1]);
    s.step = static_cast<int>(f[2]);
    s.dep.jammer = {f[3], f[4]};
    size_t k = 5;
    for (int i = 0; i < n; ++i, k += 2) s.dep.positions.push_back({f[k], f[k + 1]});
    s.label = f[k++];
    s.directions = Mat(n - 2, 2);
    for (int r = 0; r < n - 2; ++r, k += 2) {
      s.directions.at(r, 0) = f[k];
      s.directions.at(r, 1) = f[k + 1];
    }
    s.valid_direction = f[k] != 0.0;
    samples.push_back(std::move(s));
  }
  return samples;
}

void write_trajectories(const std::string& path, const std::string& method,
                        const std::vector<TrajectoryRecord>& records) {
  std::ofstream out = open_out(path);
  out << "relayopt-trajectories 1 " << method << "\n";
  for (const auto& rec : records) {
    for (size_t t = 0; t < rec.traj.deployments.size(); ++t) {
      const Deployment& d = rec.traj.deployments[t];
      out << rec.deployment_id << " " << t << " " << fmt17(d.jammer.x) << " " << fmt17(d.jammer.y);
      for (const auto& p : d.positions) out << " " << fmt17(p.x) << " " << fmt17(p.y);
      out << " " << fmt17(rec.traj.max_flows[t]) << " " << rec.traj.tags[t] << "\n";
    }
  }
  if (!out) throw InputError("write failed: " + path);
}

TrajectoryFile read_trajectories(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic, method;
  int version = 0;
  if (!(hs >> magic >> version >> method) || magic != "relayopt-trajectories" || version != 1)
    throw ParseError("not a trajectory file: " + path);

  TrajectoryFile file;
  file.method = method;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ss >> tok) tokens.push_back(tok);
    if (tokens.size() < 8) throw ParseError("truncated trajectory record in " + path);
    const std::string tag = tokens.back();
    const size_t numeric = tokens.size() - 1;
    if ((numeric - 5) % 2 != 0) throw ParseError("trajectory record length mismatch in " + path);
    const int n = static_cast<int>((numeric - 5) / 2);

    const int dep_id = std::stoi(tokens[0]);
    const size_t step = std::stoul(tokens[1]);
    Deployment d;
    d.jammer = {std::stod(tokens[2]), std::stod(tokens[3])};
    for (int i = 0; i < n; ++i)
      d.positions.push_back({std::stod(tokens[4 + 2 * i]), std::stod(tokens[5 + 2 * i])});
    const double value = std::stod(tokens[4 + 2 * n]);

    if (file.records.empty() || file.records.back().deployment_id != dep_id) {
      if (step != 0) throw ParseError("trajectory does not start at step 0 in " + path);
      file.records.push_back({dep_id, {}});
    }
    auto& traj = file.records.back().traj;
    if (step != traj.deployments.size())
      throw ParseError("non-contiguous trajectory steps in " + path);
    traj.deployments.push_back(std::move(d));
    traj.max_flows.push_back(value);
    traj.tags.push_back(tag);
  }
  return file;
}

}  // namespace relayopt::io
