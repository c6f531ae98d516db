#include "bnkf/simkit.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "bnkf/csv.hpp"
#include "bnkf/geom.hpp"
#include "bnkf/rng.hpp"

namespace bnkf::simkit {

namespace {
constexpr double kDeg = geom::kPi / 180.0;
constexpr double kMinRange = 1e-3;  // m, range clamp after noise
}  // namespace

NoiseSigmas tier_sigmas(Tier tier) {
  NoiseSigmas s;
  switch (tier) {
    case Tier::low:
      s.range = 1.0;
      s.range_rate = 0.01;
      s.bearing = 0.001 * kDeg;
      s.elevation = 0.001 * kDeg;
      break;
    case Tier::medium:
      s.range = 10.0;
      s.range_rate = 0.1;
      s.bearing = 0.01 * kDeg;
      s.elevation = 0.01 * kDeg;
      break;
    case Tier::high:
      s.range = 100.0;
      s.range_rate = 1.0;
      s.bearing = 0.1 * kDeg;
      s.elevation = 0.1 * kDeg;
      break;
  }
  return s;
}

const char* tier_name(Tier tier) {
  switch (tier) {
    case Tier::low: return "low";
    case Tier::medium: return "medium";
    case Tier::high: return "high";
  }
  return "?";
}

Tier tier_from_name(const std::string& name) {
  if (name == "low") return Tier::low;
  if (name == "medium") return Tier::medium;
  if (name == "high") return Tier::high;
  throw EstimateError("unknown noise tier '" + name + "'");
}

Trajectory generate_trajectory(std::uint64_t seed, double duration, double dt0,
                               const GeneratorParams& params) {
  if (!(duration > 0.0) || !(dt0 > 0.0))
    throw EstimateError("generate_trajectory: duration and dt0 must be positive");
  if (!(params.v_max > 0.0) || !(params.a_max > 0.0) ||
      params.n_sinusoids < 0 || !(params.omega_max >= params.omega_min) ||
      !(params.omega_min > 0.0))
    throw EstimateError("generate_trajectory: infeasible generator bounds");
  const double drift = params.drift_velocity.norm();
  if (drift > params.v_max)
    throw EstimateError("generate_trajectory: drift velocity exceeds v_max");

  std::mt19937_64 eng(rng::derive_seed(seed, "shape"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double inv_sqrt3 = 1.0 / std::sqrt(3.0);
  struct Mode {
    double amp, omega, phase;
  };
  Vector3 base;
  std::vector<Mode> modes[3];

  for (int a = 0; a < 3; ++a) {
    base[a] = params.center[a] +
              (2.0 * unit(eng) - 1.0) * params.center_half_extent[a];

    const int K = params.n_sinusoids;
    std::vector<Mode> ms(static_cast<std::size_t>(K));
    double sum_a = 0.0, sum_v = 0.0, sum_acc = 0.0;
    for (auto& m : ms) {
      m.omega = params.omega_min +
                unit(eng) * (params.omega_max - params.omega_min);
      m.phase = unit(eng) * 2.0 * geom::kPi;
      m.amp = 0.2 + 0.8 * unit(eng);  // raw, rescaled below
      sum_a += m.amp;
      sum_v += m.amp * m.omega;
      sum_acc += m.amp * m.omega * m.omega;
    }
    if (K > 0) {
      const double margin = 0.6 + 0.35 * unit(eng);
      // Axis budgets: position from the configured envelope, velocity and
      // acceleration shared evenly over the axes.
      const double pos_budget = params.amplitude_budget[a];
      const double vel_budget =
          std::max(0.0, params.v_max * inv_sqrt3 -
                            std::abs(params.drift_velocity[a]));
      const double acc_budget = params.a_max * inv_sqrt3;
      double f = margin * pos_budget / sum_a;
      if (sum_v > 0.0) f = std::min(f, vel_budget / sum_v);
      if (sum_acc > 0.0) f = std::min(f, acc_budget / sum_acc);
      for (auto& m : ms) m.amp *= f * params.amplitude_scale;
    }
    modes[a] = std::move(ms);
  }

  Trajectory traj;
  traj.seed = seed;
  traj.dt0 = dt0;
  const auto n = static_cast<std::size_t>(std::floor(duration / dt0 + 1e-9)) + 1;
  traj.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt0;
    KinematicState ks;
    ks.timestamp = t;
    for (int a = 0; a < 3; ++a) {
      double p = base[a] + params.drift_velocity[a] * t;
      double v = params.drift_velocity[a];
      for (const auto& m : modes[a]) {
        p += m.amp * std::sin(m.omega * t + m.phase);
        v += m.amp * m.omega * std::cos(m.omega * t + m.phase);
      }
      ks.position[a] = p;
      ks.velocity[a] = v;
    }
    traj.samples[i] = ks;
  }
  return traj;
}

MeasurementSequence simulate_measurements(const Trajectory& traj,
                                          const SensorPose& sensor, Tier tier,
                                          std::uint64_t seed,
                                          double noise_scale) {
  if (traj.samples.empty())
    throw EstimateError("simulate_measurements: empty trajectory");

  MeasurementSequence seq;
  seq.trajectory_id = traj.id;
  seq.tier = tier;
  seq.rate = 1.0;
  seq.seed = seed;
  seq.sigmas = tier_sigmas(tier);

  rng::NormalStream noise(seed);
  seq.items.reserve(traj.samples.size());
  for (const auto& s : traj.samples) {
    SphericalMeasurement m = geom::cart_to_spherical(s, sensor);
    // Draw order per sample: range, bearing, elevation, range-rate.
    m.range += noise_scale * seq.sigmas.range * noise();
    m.bearing = geom::wrap_angle(m.bearing +
                                 noise_scale * seq.sigmas.bearing * noise());
    m.elevation = std::clamp(
        m.elevation + noise_scale * seq.sigmas.elevation * noise(),
        -geom::kPi / 2.0, geom::kPi / 2.0);
    m.range_rate += noise_scale * seq.sigmas.range_rate * noise();
    m.range = std::max(m.range, kMinRange);
    seq.items.push_back(m);
  }
  return seq;
}

MeasurementSequence downsample(const MeasurementSequence& seq, double rate,
                               std::uint64_t seed) {
  if (seq.items.size() < 4)
    throw EstimateError("downsample: need at least 4 measurements");
  if (!(rate > 0.0) || rate > 1.0)
    throw EstimateError("downsample: rate must lie in (0, 1]");

  MeasurementSequence out = seq;
  out.rate = rate;
  out.seed = seed;
  if (rate == 1.0) return out;

  const auto n = seq.items.size();
  const auto keep = std::max<std::size_t>(
      2, static_cast<std::size_t>(
             std::llround(rate * static_cast<double>(n))));

  std::vector<std::size_t> tail_indices(n - 2);
  for (std::size_t i = 0; i < tail_indices.size(); ++i) tail_indices[i] = i + 2;
  std::vector<std::size_t> chosen;
  chosen.reserve(keep - 2);
  std::mt19937_64 eng(seed);
  std::sample(tail_indices.begin(), tail_indices.end(),
              std::back_inserter(chosen), keep - 2, eng);

  out.items.clear();
  out.items.reserve(keep);
  out.items.push_back(seq.items[0]);
  out.items.push_back(seq.items[1]);
  for (std::size_t idx : chosen) out.items.push_back(seq.items[idx]);
  return out;
}

Vector3 interpolate_position(const Trajectory& traj, double t) {
  const auto& s = traj.samples;
  if (s.empty()) throw EstimateError("interpolate_position: empty trajectory");
  if (t <= s.front().timestamp) return s.front().position;
  if (t >= s.back().timestamp) return s.back().position;

  auto it = std::lower_bound(
      s.begin(), s.end(), t,
      [](const KinematicState& k, double v) { return k.timestamp < v; });
  if (it->timestamp == t) return it->position;
  const auto& k1 = *it;
  const auto& k0 = *(it - 1);
  const double h = k1.timestamp - k0.timestamp;
  const double u = (t - k0.timestamp) / h;
  const double u2 = u * u, u3 = u2 * u;
  const double h00 = 2 * u3 - 3 * u2 + 1;
  const double h10 = u3 - 2 * u2 + u;
  const double h01 = -2 * u3 + 3 * u2;
  const double h11 = u3 - u2;
  return h00 * k0.position + h10 * h * k0.velocity + h01 * k1.position +
         h11 * h * k1.velocity;
}

std::vector<DatasetRow> build_supervised(const MeasurementSequence& seq,
                                         const Trajectory& traj) {
  if (seq.items.size() < 2)
    throw EstimateError("build_supervised: need at least 2 measurements");
  std::vector<DatasetRow> rows;
  rows.reserve(seq.items.size());
  for (const auto& m : seq.items) {
    DatasetRow r;
    r.traj_id = seq.trajectory_id;
    r.t = m.timestamp;
    r.meas = m;
    r.sigmas = seq.sigmas;
    r.tier = seq.tier;
    r.rate = seq.rate;
    r.target = interpolate_position(traj, m.timestamp);
    rows.push_back(r);
  }
  return rows;
}

std::vector<SequenceView> SupervisedDataset::sequences() const {
  std::vector<SequenceView> out;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    while (j < rows.size() && rows[j].traj_id == rows[i].traj_id &&
           rows[j].rate == rows[i].rate)
      ++j;
    SequenceView v;
    v.traj_id = rows[i].traj_id;
    v.tier = rows[i].tier;
    v.rate = rows[i].rate;
    v.fold = rows[i].fold;
    v.begin = i;
    v.end = j;
    out.push_back(v);
    i = j;
  }
  return out;
}

std::vector<PairRow> SupervisedDataset::pairs() const {
  std::vector<PairRow> out;
  for (const auto& sv : sequences()) {
    for (std::size_t i = sv.begin; i + 1 < sv.end; ++i) {
      const DatasetRow& a = rows[i];
      const DatasetRow& b = rows[i + 1];
      PairRow p;
      p.x = make_feature(a.meas, b.meas, a.sigmas);
      p.target = b.target;
      p.traj_id = a.traj_id;
      p.t0 = a.t;
      p.t1 = b.t;
      p.tier = a.tier;
      p.rate = a.rate;
      p.fold = a.fold;
      p.step_index = i + 1 - sv.begin;
      out.push_back(p);
    }
  }
  return out;
}

void assign_folds(SupervisedDataset& dataset, int k, std::uint64_t seed) {
  if (k < 1) throw EstimateError("assign_folds: k must be positive");
  std::vector<std::int64_t> ids;
  for (const auto& r : dataset.rows)
    if (ids.empty() || ids.back() != r.traj_id) ids.push_back(r.traj_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (static_cast<int>(ids.size()) < k)
    throw EstimateError("assign_folds: fewer trajectories than folds");

  std::mt19937_64 eng(seed);
  std::shuffle(ids.begin(), ids.end(), eng);

  // Near-equal contiguous chunks of the shuffled order.
  std::vector<std::pair<std::int64_t, int>> fold_of;
  const std::size_t q = ids.size() / static_cast<std::size_t>(k);
  const std::size_t rem = ids.size() % static_cast<std::size_t>(k);
  std::size_t pos = 0;
  for (int f = 0; f < k; ++f) {
    const std::size_t count = q + (static_cast<std::size_t>(f) < rem ? 1 : 0);
    for (std::size_t i = 0; i < count; ++i)
      fold_of.emplace_back(ids[pos++], f);
  }
  std::sort(fold_of.begin(), fold_of.end());

  auto lookup = [&](std::int64_t id) {
    auto it = std::lower_bound(
        fold_of.begin(), fold_of.end(), id,
        [](const auto& p, std::int64_t v) { return p.first < v; });
    return it->second;
  };
  for (auto& r : dataset.rows) r.fold = lookup(r.traj_id);
  dataset.n_folds = k;
}

// --- file formats ---

namespace {

const std::vector<std::string> kTrajHeader = {"traj_id", "t",  "x",  "y",
                                              "z",       "vx", "vy", "vz"};
const std::vector<std::string> kMeasHeader = {
    "traj_id", "t", "range", "bearing", "elevation", "range_rate",
    "sigma_range", "sigma_bearing", "sigma_elevation", "sigma_range_rate",
    "tier", "rate"};
const std::vector<std::string> kDatasetHeader = {
    "traj_id", "t", "range", "bearing", "elevation", "range_rate",
    "sigma_range", "sigma_bearing", "sigma_elevation", "sigma_range_rate",
    "tier", "rate", "tx", "ty", "tz", "fold"};

using csv::format_double;

std::vector<std::string> measurement_fields(std::int64_t traj_id,
                                            const SphericalMeasurement& m,
                                            const NoiseSigmas& s, Tier tier,
                                            double rate) {
  return {std::to_string(traj_id),
          format_double(m.timestamp),
          format_double(m.range),
          format_double(m.bearing),
          format_double(m.elevation),
          format_double(m.range_rate),
          format_double(s.range),
          format_double(s.bearing),
          format_double(s.elevation),
          format_double(s.range_rate),
          tier_name(tier),
          format_double(rate)};
}

}  // namespace

void write_trajectories(const std::vector<Trajectory>& trajs,
                        const std::string& path) {
  csv::Writer w(path, kTrajHeader);
  for (const auto& traj : trajs)
    for (const auto& s : traj.samples)
      w.row({std::to_string(traj.id), format_double(s.timestamp),
             format_double(s.position.x()), format_double(s.position.y()),
             format_double(s.position.z()), format_double(s.velocity.x()),
             format_double(s.velocity.y()), format_double(s.velocity.z())});
  w.close();
}

std::vector<Trajectory> read_trajectories(const std::string& path) {
  const csv::Table t = csv::read_file(path, kTrajHeader);
  const std::size_t c_id = t.column("traj_id"), c_t = t.column("t");
  const std::size_t c_x = t.column("x"), c_y = t.column("y"),
                    c_z = t.column("z");
  const std::size_t c_vx = t.column("vx"), c_vy = t.column("vy"),
                    c_vz = t.column("vz");

  std::vector<Trajectory> out;
  for (const auto& row : t.rows) {
    const std::int64_t id = csv::parse_int(row[c_id]);
    if (out.empty() || out.back().id != id) {
      Trajectory traj;
      traj.id = id;
      out.push_back(traj);
    }
    KinematicState ks;
    ks.timestamp = csv::parse_double(row[c_t]);
    ks.position = Vector3(csv::parse_double(row[c_x]),
                          csv::parse_double(row[c_y]),
                          csv::parse_double(row[c_z]));
    ks.velocity = Vector3(csv::parse_double(row[c_vx]),
                          csv::parse_double(row[c_vy]),
                          csv::parse_double(row[c_vz]));
    if (!out.back().samples.empty() &&
        !(ks.timestamp > out.back().samples.back().timestamp))
      throw EstimateError("read_trajectories: timestamps not increasing");
    out.back().samples.push_back(ks);
  }
  for (auto& traj : out)
    if (traj.samples.size() >= 2)
      traj.dt0 = traj.samples[1].timestamp - traj.samples[0].timestamp;
  return out;
}

void write_measurements(const std::vector<MeasurementSequence>& seqs,
                        const std::string& path) {
  csv::Writer w(path, kMeasHeader);
  for (const auto& seq : seqs)
    for (const auto& m : seq.items)
      w.row(measurement_fields(seq.trajectory_id, m, seq.sigmas, seq.tier,
                               seq.rate));
  w.close();
}

void write_dataset(const SupervisedDataset& dataset, const std::string& path) {
  csv::Writer w(path, kDatasetHeader);
  for (const auto& r : dataset.rows) {
    auto fields = measurement_fields(r.traj_id, r.meas, r.sigmas, r.tier, r.rate);
    fields.push_back(format_double(r.target.x()));
    fields.push_back(format_double(r.target.y()));
    fields.push_back(format_double(r.target.z()));
    fields.push_back(std::to_string(r.fold));
    w.row(fields);
  }
  w.close();
}

SupervisedDataset read_dataset(const std::string& path) {
  const csv::Table t = csv::read_file(path, kDatasetHeader);
  const std::size_t c_id = t.column("traj_id"), c_t = t.column("t");
  const std::size_t c_r = t.column("range"), c_b = t.column("bearing"),
                    c_e = t.column("elevation"), c_rr = t.column("range_rate");
  const std::size_t c_sr = t.column("sigma_range"),
                    c_sb = t.column("sigma_bearing"),
                    c_se = t.column("sigma_elevation"),
                    c_srr = t.column("sigma_range_rate");
  const std::size_t c_tier = t.column("tier"), c_rate = t.column("rate");
  const std::size_t c_tx = t.column("tx"), c_ty = t.column("ty"),
                    c_tz = t.column("tz"), c_fold = t.column("fold");

  SupervisedDataset out;
  int max_fold = -1;
  out.rows.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    DatasetRow r;
    r.traj_id = csv::parse_int(row[c_id]);
    r.t = csv::parse_double(row[c_t]);
    r.meas.timestamp = r.t;
    r.meas.range = csv::parse_double(row[c_r]);
    r.meas.bearing = csv::parse_double(row[c_b]);
    r.meas.elevation = csv::parse_double(row[c_e]);
    r.meas.range_rate = csv::parse_double(row[c_rr]);
    r.sigmas.range = csv::parse_double(row[c_sr]);
    r.sigmas.bearing = csv::parse_double(row[c_sb]);
    r.sigmas.elevation = csv::parse_double(row[c_se]);
    r.sigmas.range_rate = csv::parse_double(row[c_srr]);
    r.tier = tier_from_name(row[c_tier]);
    r.rate = csv::parse_double(row[c_rate]);
    r.target = Vector3(csv::parse_double(row[c_tx]),
                       csv::parse_double(row[c_ty]),
                       csv::parse_double(row[c_tz]));
    r.fold = static_cast<int>(csv::parse_int(row[c_fold]));
    max_fold = std::max(max_fold, r.fold);
    out.rows.push_back(r);
  }
  out.n_folds = max_fold + 1;
  return out;
}

}  // namespace bnkf::simkit
