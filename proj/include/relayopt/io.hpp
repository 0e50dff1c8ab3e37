#pragma once
#include <fstream>
#include <string>
#include <vector>

#include "relayopt/core.hpp"
#include "relayopt/optimize.hpp"

namespace relayopt::datagen {
struct TrajectorySample;
}

namespace relayopt::io {

// 17 significant digits: exact round trip for 64-bit reals.
std::string fmt17(double v);
// 6 significant digits for report output.
std::string fmt6(double v);

// Test-set / deployment files: one line per deployment after a header.
void write_deployments(const std::string& path, const std::vector<Deployment>& deps);
std::vector<Deployment> read_deployments(const std::string& path);

// Dataset files are header-less; every record carries its schema version.
class DatasetWriter {
 public:
  explicit DatasetWriter(const std::string& path, bool append = false);
  void append(const datagen::TrajectorySample& s);

 private:
  std::ofstream out_;
  std::string path_;
};

std::vector<datagen::TrajectorySample> read_dataset(const std::string& path);

struct TrajectoryRecord {
  int deployment_id = 0;
  optimize::Trajectory traj;
};

struct TrajectoryFile {
  std::string method;
  std::vector<TrajectoryRecord> records;
};

void write_trajectories(const std::string& path, const std::string& method,
                        const std::vector<TrajectoryRecord>& records);
TrajectoryFile read_trajectories(const std::string& path);

}  // namespace relayopt::io
