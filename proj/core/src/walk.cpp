#include "rwre/walk.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "rwre/error.hpp"
#include "rwre/sparse.hpp"

namespace rwre {

namespace {

constexpr std::uint64_t kCoinTag = tag_hash("coin");
constexpr char kPathMagic[8] = {'R', 'W', 'R', 'E', 'P', 'A', 'T', 'H'};
constexpr std::uint32_t kPathVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) fail(ErrorKind::io, "truncated path dump");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

double dist2(const Site& a, const Site& b) { return static_cast<double>(norm2_sq(a - b)); }

}  // namespace

MoveCode sample_move(const TransitionKernel& k, double u) {
  double cum = 0.0;
  MoveCode last = kHold;
  for (int i = 0; i < k.dim; ++i) {
    if (k.p_plus[i] > 0.0) {
      cum += k.p_plus[i];
      last = move_code(i, 1);
      if (u < cum) return last;
    }
    if (k.p_minus[i] > 0.0) {
      cum += k.p_minus[i];
      last = move_code(i, -1);
      if (u < cum) return last;
    }
  }
  return k.p_hold > 0.0 ? kHold : last;
}

bool CoinStream::coin(std::uint64_t seed, double prob, std::size_t n, const Site& z) {
  return unit_double(hash_combine(hash_site(seed, kCoinTag, z), n)) < prob;
}

PathRecord::PathRecord(int dim, Site start) : dim_(dim), start_(start), current_(start) {
  checkpoints_.push_back(start);
}

void PathRecord::push(MoveCode m) {
  moves_.push_back(m);
  current_ += move_vector(m);
  if (moves_.size() % kCheckpointStride == 0) checkpoints_.push_back(current_);
}

Site PathRecord::position(std::size_t n) const {
  if (n > moves_.size()) fail(ErrorKind::domain, "position beyond path length");
  const std::size_t c = n / kCheckpointStride;
  Site s = checkpoints_[c];
  for (std::size_t j = c * kCheckpointStride; j < n; ++j) s += move_vector(moves_[j]);
  return s;
}

std::vector<Site> PathRecord::positions() const {
  std::vector<Site> out;
  out.reserve(moves_.size() + 1);
  Site s = start_;
  out.push_back(s);
  for (MoveCode m : moves_) {
    s += move_vector(m);
    out.push_back(s);
  }
  return out;
}

std::vector<std::int64_t> PathRecord::levels(int axis) const {
  std::vector<std::int64_t> out;
  out.reserve(moves_.size() + 1);
  std::int64_t v = 0;
  out.push_back(v);
  for (MoveCode m : moves_) {
    if (m != kHold && move_axis(m) == axis) v += move_sign(m);
    out.push_back(v);
  }
  return out;
}

PathRecord simulate(const Environment& env, const Site& start, std::size_t n, Rng& rng) {
  PathRecord path(env.dim(), start);
  path.reserve(n);
  Site x = start;
  for (std::size_t i = 0; i < n; ++i) {
    const MoveCode m = sample_move(env.kernel(x), rng.uniform());
    path.push(m);
    x += move_vector(m);
  }
  return path;
}

std::vector<double> coin_step_law(const TransitionKernel& k, double kappa, bool coin) {
  const int d = k.dim;
  std::vector<double> law(static_cast<std::size_t>(2 * d + 1), 0.0);
  for (int i = 0; i < d; ++i) {
    for (int s : {1, -1}) {
      const double w = s > 0 ? k.p_plus[i] : k.p_minus[i];
      law[move_code(i, s)] = coin ? 1.0 / (2.0 * d) : (w - kappa / 2.0) / (1.0 - d * kappa);
    }
  }
  return law;
}

PathRecord simulate_with_coins(const Environment& env, double kappa, const Site& start, std::size_t n,
                               Rng& rng, std::uint64_t coin_seed) {
  const int d = env.dim();
  if (!(kappa > 0.0 && kappa <= 1.0 / (2.0 * d) + 1e-15))
    fail(ErrorKind::config, "coin parameter must satisfy 0 < κ ≤ 1/(2d)");
  PathRecord path(d, start);
  path.reserve(n);
  CoinStream coins{coin_seed, d * kappa, {}};
  coins.bits.reserve(n);
  Site x = start;
  for (std::size_t i = 0; i < n; ++i) {
    const TransitionKernel k = env.kernel(x);
    if (k.p_hold > 1e-12) fail(ErrorKind::precondition, "coin decomposition needs p_hold = 0 at " + to_string(x, d));
    if (k.min_prob() < kappa - 1e-15)
      fail(ErrorKind::decomposition, "ellipticity below κ at " + to_string(x, d));
    const bool c = coins.at(i, x);
    coins.bits.push_back(c ? 1 : 0);
    const double u = rng.uniform();
    MoveCode m;
    if (c) {
      m = static_cast<MoveCode>(1 + std::min<int>(2 * d - 1, static_cast<int>(u * 2 * d)));
    } else {
      const double scale = 1.0 - d * kappa;
      double cum = 0.0;
      m = move_code(d - 1, -1);
      for (int j = 1; j <= 2 * d; ++j) {
        const double w = k.prob(static_cast<MoveCode>(j));
        cum += (w - kappa / 2.0) / scale;
        if (u < cum) {
          m = static_cast<MoveCode>(j);
          break;
        }
      }
    }
    path.push(m);
    x += move_vector(m);
  }
  path.coins = std::move(coins);
  return path;
}

ExitResult exit_time_ball(const Environment& env, const Site& centre, double r, std::size_t budget, Rng& rng,
                          bool throw_on_budget) {
  const double r2 = r * r;
  Site x = centre;
  for (std::size_t n = 1; n <= budget; ++n) {
    x += move_vector(sample_move(env.kernel(x), rng.uniform()));
    if (dist2(x, centre) > r2) return {n, x, false};
  }
  if (throw_on_budget) fail(ErrorKind::budget, "step budget exhausted before leaving the ball");
  return {budget, x, true};
}

ExitResult exit_time_ball(const PathRecord& path, double r) {
  const double r2 = r * r;
  Site x = path.start();
  const auto& moves = path.moves();
  for (std::size_t n = 0; n < moves.size(); ++n) {
    x += move_vector(moves[n]);
    if (dist2(x, path.start()) > r2) return {n + 1, x, false};
  }
  return {moves.size(), x, true};
}

double expected_exit_time_exact(const Environment& env, const Site& centre, double r) {
  const int d = env.dim();
  const auto R = static_cast<std::int64_t>(std::floor(r));
  const Box box = Box::centred(d, R);
  const double r2 = r * r;
  std::vector<std::ptrdiff_t> slot(box.size(), -1);
  std::vector<Site> sites;
  for (std::size_t i = 0; i < box.size(); ++i) {
    const Site s = box.site(i);
    if (static_cast<double>(norm2_sq(s)) <= r2) {
      slot[i] = static_cast<std::ptrdiff_t>(sites.size());
      sites.push_back(s);
    }
  }
  std::vector<Triplet> t;
  for (std::size_t a = 0; a < sites.size(); ++a) {
    const auto row = static_cast<std::ptrdiff_t>(a);
    const TransitionKernel k = env.kernel(centre + sites[a]);
    t.emplace_back(row, row, 1.0 - k.p_hold);
    for (int m = 1; m <= 2 * d; ++m) {
      const Site y = sites[a] + move_vector(static_cast<MoveCode>(m));
      if (!box.contains(y)) continue;
      const auto col = slot[box.index(y)];
      if (col >= 0) t.emplace_back(row, col, -k.prob(static_cast<MoveCode>(m)));
    }
  }
  const Eigen::MatrixXd sol = sparse_solve(sites.size(), t, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(sites.size())));
  return sol(slot[box.index(origin())], 0);
}

std::optional<std::size_t> first_hitting_level(const PathRecord& path, std::int64_t displacement, int axis) {
  std::int64_t v = 0;
  if (displacement == 0) return 0;
  const auto& moves = path.moves();
  for (std::size_t n = 0; n < moves.size(); ++n) {
    const MoveCode m = moves[n];
    if (m != kHold && move_axis(m) == axis) v += move_sign(m);
    if (v == displacement) return n + 1;
  }
  return std::nullopt;
}

std::vector<std::optional<std::size_t>> level_hitting_times(const PathRecord& path, std::int64_t spacing,
                                                            std::size_t n_max, int axis) {
  if (spacing < 1) fail(ErrorKind::precondition, "level spacing must be a positive integer");
  std::vector<std::optional<std::size_t>> out(n_max + 1);
  out[0] = 0;
  std::size_t next = 1;
  std::int64_t v = 0;
  const auto& moves = path.moves();
  for (std::size_t n = 0; n < moves.size() && next <= n_max; ++n) {
    const MoveCode m = moves[n];
    if (m != kHold && move_axis(m) == axis) v += move_sign(m);
    if (v == static_cast<std::int64_t>(next) * spacing) out[next++] = n + 1;
  }
  return out;
}

LevelStats::LevelStats(const PathRecord& path, int axis) {
  const auto lv = path.levels(axis);
  for (std::size_t n = 0; n < lv.size(); ++n) {
    if (lv[n] < 0) continue;
    const auto i = static_cast<std::size_t>(lv[n]);
    if (i == first_.size()) {
      first_.push_back(n);
      visits_.emplace_back();
    }
    visits_[i].push_back(n);
  }
}

void LevelStats::check(std::int64_t i, std::int64_t j) const {
  if (i < 0 || j <= i || j > max_level()) fail(ErrorKind::domain, "level indices outside the observed range");
}

std::size_t LevelStats::N(std::int64_t i, std::int64_t j) const {
  check(i, j);
  const auto& v = visits(i);
  return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), T(j)) - v.begin());
}

std::size_t LevelStats::h(std::int64_t i, std::int64_t l) const {
  const std::size_t n = N(i, i + l);
  return visits(i)[n - 1] - T(i);
}

double LevelStats::H(std::int64_t m, std::int64_t l) const {
  double s = 0.0;
  for (std::int64_t i = 0; i < l; ++i) s += static_cast<double>(N(m + i, m + l)) / static_cast<double>((i + 1) * (i + 1));
  return s;
}

double LevelStats::E(std::int64_t M, std::int64_t l, double a) const {
  if (M < 0 || l < 1 || M + l > max_level()) fail(ErrorKind::domain, "E_{M,l} needs M + l within the observed levels");
  std::int64_t count = 0;
  for (std::int64_t m = 0; m <= M; ++m)
    if (static_cast<double>(h(m, l)) <= a && H(m, l) <= a) ++count;
  return static_cast<double>(count) / static_cast<double>(M + 1);
}

void LevelStats::write_csv(std::ostream& out, std::int64_t l) const {
  out << "i,T_i,N_i_il,h_i_l,H_i_l\r\n";
  for (std::int64_t i = 0; i + l <= max_level(); ++i)
    out << i << ',' << T(i) << ',' << N(i, i + l) << ',' << h(i, l) << ',' << H(i, l) << "\r\n";
}

std::optional<std::size_t> stopping_R(const PathRecord& path, double c5, int axis) {
  if (!(c5 > 0.0)) fail(ErrorKind::config, "c5 must be positive");
  std::vector<std::size_t> count;
  std::int64_t v = 0;
  count.push_back(1);
  if (1.0 > c5) return 0;
  const auto& moves = path.moves();
  for (std::size_t n = 0; n < moves.size(); ++n) {
    const MoveCode m = moves[n];
    if (m != kHold && move_axis(m) == axis) v += move_sign(m);
    if (v <= 0) return n + 1;
    const auto j = static_cast<std::size_t>(v);
    if (j >= count.size()) count.resize(j + 1, 0);
    if (static_cast<double>(++count[j]) > c5 * static_cast<double>((j + 1) * (j + 1))) return n + 1;
  }
  return std::nullopt;
}

std::vector<std::uint64_t> visits_to_start(const Environment& env, const Site& start,
                                           const std::vector<std::size_t>& horizons, Rng& rng) {
  if (!std::is_sorted(horizons.begin(), horizons.end())) fail(ErrorKind::domain, "horizons must be ascending");
  std::vector<std::uint64_t> out;
  out.reserve(horizons.size());
  Site x = start;
  std::uint64_t visits = 0;
  std::size_t n = 0;
  for (std::size_t h : horizons) {
    for (; n < h; ++n) {
      x += move_vector(sample_move(env.kernel(x), rng.uniform()));
      visits += x == start ? 1 : 0;
    }
    out.push_back(visits);
  }
  return out;
}

void write_path(std::ostream& out, const PathRecord& path, std::uint64_t seed, const std::string& env_descriptor) {
  out.write(kPathMagic, 8);
  put_u64(out, kPathVersion);
  put_u64(out, static_cast<std::uint64_t>(path.dim()));
  for (int i = 0; i < path.dim(); ++i) put_u64(out, static_cast<std::uint64_t>(path.start()[i]));
  put_u64(out, seed);
  put_u64(out, env_descriptor.size());
  out.write(env_descriptor.data(), static_cast<std::streamsize>(env_descriptor.size()));
  const auto& moves = path.moves();
  put_u64(out, moves.size());
  for (std::size_t i = 0; i < moves.size(); i += 2) {
    const std::uint8_t lo = moves[i];
    const std::uint8_t hi = i + 1 < moves.size() ? moves[i + 1] : 0;
    out.put(static_cast<char>(lo | (hi << 4)));
  }
  if (!out) fail(ErrorKind::io, "failed to write path dump");
}

PathDump read_path(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || !std::equal(magic, magic + 8, kPathMagic)) fail(ErrorKind::io, "not a path dump");
  if (get_u64(in) != kPathVersion) fail(ErrorKind::io, "unsupported path dump version");
  const auto dim = static_cast<int>(get_u64(in));
  if (dim < 1 || dim > kMaxDim) fail(ErrorKind::io, "bad dimension in path dump");
  Site start{};
  for (int i = 0; i < dim; ++i) start[i] = static_cast<std::int64_t>(get_u64(in));
  PathDump dump;
  dump.seed = get_u64(in);
  dump.env_descriptor.resize(get_u64(in));
  in.read(dump.env_descriptor.data(), static_cast<std::streamsize>(dump.env_descriptor.size()));
  const std::uint64_t n = get_u64(in);
  dump.path = PathRecord(dim, start);
  dump.path.reserve(n);
  for (std::uint64_t i = 0; i < n; i += 2) {
    const int byte = in.get();
    if (byte == EOF) fail(ErrorKind::io, "truncated path dump");
    for (std::uint64_t j = i; j < std::min(n, i + 2); ++j) {
      const auto m = static_cast<MoveCode>(j == i ? (byte & 0x0F) : (byte >> 4));
      if (m > 2 * dim) fail(ErrorKind::io, "invalid move code in path dump");
      dump.path.push(m);
    }
  }
  return dump;
}

}  // namespace rwre
