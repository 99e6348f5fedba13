// Regenerates the bundled fixtures under the given directory (default: data).

#include <filesystem>
#include <fstream>
#include <iostream>

#include "carbonctl/carbonctl.hpp"

using namespace carbonctl;
namespace fs = std::filesystem;

namespace {

std::ofstream create(const fs::path &p) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write " + p.string());
  return out;
}

nlohmann::ordered_json demo_config() {
  nlohmann::ordered_json servers = nlohmann::ordered_json::array();
  const auto fleet = fixtures::demo::fleet();
  for (const auto &s : fleet.servers())
    servers.push_back({{"id", s.id},
                       {"capacity_multiple", s.capacity_multiple},
                       {"cores", s.cores},
                       {"base_power_w", s.base_power_w},
                       {"peak_power_w", s.peak_power_w},
                       {"memory_gb", s.memory_gb}});
  nlohmann::ordered_json j;
  j["fleet"] = {{"baseline", "d710"}, {"servers", servers}};
  j["container"] = {{"c_target_g_per_hr", fixtures::demo::kTarget},
                    {"epsilon", 0.05},
                    {"memory_gb", fixtures::demo::kMemoryGb},
                    {"min_dwell_s", 600}};
  j["policy"] = {{"kind", "cc-efficiency"}, {"quota", "cores"}};
  j["sim"] = {{"step_s", 300}, {"seed", 1}};
  j["migration"] = {{"c0_s", 10}, {"c1_s_per_gb", 15}, {"mode", "stop-and-copy"}};
  return j;
}

} // namespace

int main(int argc, char **argv) {
  const fs::path root = argc > 1 ? argv[1] : "data";
  try {
    {
      auto out = create(root / "carbon_fixture.csv");
      write_carbon_header(out);
      for (const auto &t : fixtures::carbon())
        write_carbon_rows(out, t);
    }
    {
      auto out = create(root / "workload_fixture.csv");
      write_workload_header(out);
      for (const auto &t : fixtures::workloads())
        write_workload_rows(out, t);
    }
    {
      auto out = create(root / "demo" / "carbon.csv");
      write_carbon_header(out);
      write_carbon_rows(out, fixtures::demo::carbon());
    }
    {
      auto out = create(root / "demo" / "workload.csv");
      write_workload_header(out);
      write_workload_rows(out, fixtures::demo::workload());
    }
    {
      auto out = create(root / "demo" / "config.json");
      out << demo_config().dump(2) << '\n';
    }
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::cout << "fixtures written to " << root.string() << '\n';
  return 0;
}
