#include <catch2/catch_amalgamated.hpp>

#include <evgrid/fleet.hpp>
#include <evgrid/grid.hpp>

#include <cmath>
#include <numeric>

using namespace evgrid::fleet;

static const std::string kData = EVGRID_DATA_DIR;

TEST_CASE("required slot counts") {
  REQUIRE(required_slots(100.0, 0.2, 1.0, 10.0) == 8);
  REQUIRE(required_slots_for_demand(60.0, 1.0, 10.0) == 6);
  REQUIRE(required_slots_for_demand(0.0, 1.0, 10.0) == 0);
  REQUIRE(required_slots(100.0, 1.0, 1.0, 10.0) == 0);
  REQUIRE(required_slots(100.0, 0.2, 0.9, 10.0) == 9);  // ceil(80/9)
  REQUIRE_THROWS_AS(required_slots(100.0, 0.2, 1.0, 0.0), FleetError);
}

namespace {

// Simpson-integrated moments of N(mean, sd^2) truncated to [a, b].
std::pair<double, double> truncated_moments(double mean, double sd, double a, double b) {
  auto phi = [&](double x) {
    const double z = (x - mean) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
  };
  const int n = 4000;  // even
  const double h = (b - a) / n;
  double z0 = 0, m1 = 0, m2 = 0;
  for (int i = 0; i <= n; ++i) {
    const double x = a + i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    z0 += w * phi(x);
    m1 += w * x * phi(x);
    m2 += w * x * x * phi(x);
  }
  z0 *= h / 3;
  m1 *= h / 3;
  m2 *= h / 3;
  const double mu = m1 / z0;
  return {mu, m2 / z0 - mu * mu};
}

}  // namespace

TEST_CASE("arrival sampling statistics match the truncated normal") {
  ArrivalParams ap;
  ap.mean_hour = 2.0;
  ap.sd_hour = 1.5;
  ap.window_start = 0.0;
  ap.window_end = 6.0;
  auto hours = sample_arrival_hours(10000, 9, ap);
  REQUIRE(hours.size() == 10000);
  for (double h : hours) {
    REQUIRE(h >= ap.window_start);
    REQUIRE(h <= ap.window_end);
  }
  const double mean = std::accumulate(hours.begin(), hours.end(), 0.0) / hours.size();
  double var = 0.0;
  for (double h : hours) var += (h - mean) * (h - mean);
  var /= hours.size();
  auto [m_ref, v_ref] = truncated_moments(2.0, 1.5, 0.0, 6.0);
  REQUIRE(std::abs(mean - m_ref) <= 0.01 * std::max(1.0, std::abs(m_ref)));
  REQUIRE(std::abs(var - v_ref) <= 0.01 * std::max(1.0, v_ref));

  // the reference scenario: empirical mean within 0.1 h of the integrated mean
  auto hours42 = sample_arrival_hours(10000, 42, ap);
  const double mean42 =
      std::accumulate(hours42.begin(), hours42.end(), 0.0) / hours42.size();
  REQUIRE(std::abs(mean42 - m_ref) <= 0.1);
}

TEST_CASE("arrival sampling edge cases") {
  ArrivalParams ap;
  REQUIRE(sample_arrival_hours(0, 1, ap).empty());
  ap.window_start = 5.0;
  ap.window_end = 5.0;
  REQUIRE_THROWS_AS(sample_arrival_hours(1, 1, ap), FleetError);
}

TEST_CASE("arrival sampling is deterministic per seed") {
  ArrivalParams ap;
  auto a = sample_arrival_hours(100, 7, ap);
  auto b = sample_arrival_hours(100, 7, ap);
  auto c = sample_arrival_hours(100, 8, ap);
  REQUIRE(a == b);
  REQUIRE(a != c);
}

TEST_CASE("hour to slot mapping floors to slot boundaries") {
  REQUIRE(hour_to_slot(0.0, 0.5, 24) == 0);
  REQUIRE(hour_to_slot(0.49, 0.5, 24) == 0);
  REQUIRE(hour_to_slot(0.5, 0.5, 24) == 1);
  REQUIRE(hour_to_slot(100.0, 0.5, 24) == 23);  // clamped
}

TEST_CASE("fleet state bookkeeping") {
  // 20 kW at 0.5 h with u_h = 1: 10 kWh per charged slot
  std::vector<PevRecord> recs{{0, 0, 0, 9, 100.0, 0.2, 20.0, 1.0}};
  FleetState st(recs);
  REQUIRE(st.remaining_kwh[0] == Catch::Approx(80.0));
  REQUIRE(st.active_set() == std::vector<int>{0});
  REQUIRE(st.horizon().value() == 9);

  st.advance({{0, 1}}, 0.5);
  REQUIRE(st.remaining_kwh[0] == Catch::Approx(70.0));
  REQUIRE(st.soc[0] == Catch::Approx(0.3));

  st.advance({{0, 0}}, 0.5);  // idle slot leaves the PEV untouched
  REQUIRE(st.remaining_kwh[0] == Catch::Approx(70.0));
  REQUIRE(st.soc[0] == Catch::Approx(0.3));
  REQUIRE(st.clock == 2);
}

TEST_CASE("demand floors at zero and soc caps at one") {
  std::vector<PevRecord> recs{{0, 0, 0, 3, 10.0, 0.5, 20.0, 1.0}};  // 5 kWh left, 10 delivered
  FleetState st(recs);
  st.advance({{0, 1}}, 0.5);
  REQUIRE(st.remaining_kwh[0] == 0.0);
  REQUIRE(st.soc[0] == 1.0);
  REQUIRE(st.active_set().empty());  // fully charged drops out of C(t)
  REQUIRE_FALSE(st.horizon().has_value());
}

TEST_CASE("charging outside the active window is rejected") {
  std::vector<PevRecord> recs{{0, 0, 2, 5, 100.0, 0.2, 20.0, 1.0}};
  FleetState st(recs);
  REQUIRE_THROWS_AS(st.advance({{0, 1}}, 0.5), FleetError);  // not arrived yet
  st.advance({}, 0.5);
  REQUIRE(st.active_set().empty());
  st.advance({}, 0.5);
  REQUIRE(st.active_set() == std::vector<int>{0});
}

TEST_CASE("horizon over multiple PEVs") {
  std::vector<PevRecord> recs{{0, 0, 0, 12, 100.0, 0.2, 20.0, 1.0},
                              {1, 0, 0, 20, 100.0, 0.2, 20.0, 1.0}};
  FleetState st(recs);
  REQUIRE(st.horizon().value() == 20);
}

TEST_CASE("generated fleets are reproducible and feasible") {
  FleetConfig cfg;
  cfg.count = 50;
  cfg.arrival = {1.0, 0.8, 0.0, 3.0};
  cfg.capacity_kwh = 40.0;
  cfg.initial_soc = 0.5;
  cfg.max_rate_kw = 50.0;
  cfg.efficiency = 0.9;
  cfg.slack_min = 1;
  cfg.slack_max = 3;
  cfg.seed = 123;
  auto a = generate_fleet(cfg, {0, 2}, 0.5, 24);
  auto b = generate_fleet(cfg, {0, 2}, 0.5, 24);
  REQUIRE(a.size() == 50);
  for (size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].station == b[i].station);
    REQUIRE(a[i].arrival_slot == b[i].arrival_slot);
    REQUIRE(a[i].departure_slot == b[i].departure_slot);
    const int need = required_slots(a[i].capacity_kwh, a[i].initial_soc, a[i].efficiency,
                                    a[i].max_rate_kw * 0.5);
    REQUIRE(need <= a[i].departure_slot - a[i].arrival_slot + 1);
    REQUIRE((a[i].station == 0 || a[i].station == 2));
  }
}

TEST_CASE("fleet file loading: records and config forms") {
  auto recs = load_fleet(kData + "/fleet3.json", {0, 2}, 0.5, 6);
  REQUIRE(recs.size() == 3);
  REQUIRE(recs[0].arrival_slot == 0);
  REQUIRE(recs[2].departure_slot == 5);
  auto gen = load_fleet(kData + "/fleet_config.json", {0, 2}, 0.5, 6);
  REQUIRE(gen.size() == 2);
}

TEST_CASE("record validation rejects bad windows") {
  nlohmann::json j = nlohmann::json::array();
  j.push_back({{"id", 0}, {"station", 0}, {"arrival_slot", 0}, {"departure_slot", 0},
               {"capacity_kwh", 100.0}, {"initial_soc", 0.2}, {"max_rate_kw", 20.0},
               {"efficiency", 1.0}});
  // 80 kWh needed, one 10 kWh slot available
  REQUIRE_THROWS_AS(records_from_json(j, 6, 0.5), FleetError);
}
