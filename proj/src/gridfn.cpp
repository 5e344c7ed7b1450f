#include "psicalc/gridfn.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>

#include <fftw3.h>

namespace psicalc {

Grid3 Grid3::commensurate(int n, double dxi, double ell) {
  if (n <= 0 || (n & (n - 1)) != 0) throw Error("grid size must be a power of two");
  double e = ell == 0.0 ? 1.0 : std::abs(ell);
  Grid3 g;
  g.n = n;
  g.dxi = dxi;
  g.dxi0 = n * dxi * dxi / (M_PI * e);
  return g;
}

namespace {

// FFTW plans keyed by size; FFTW_ESTIMATE keeps planning deterministic.
struct PlanCache {
  std::map<int, fftw_plan> fwd, bwd;
  std::map<int, fftw_complex*> buf;
  std::mutex mu;

  fftw_complex* buffer(int n) {
    auto it = buf.find(n);
    if (it != buf.end()) return it->second;
    fftw_complex* b = fftw_alloc_complex(static_cast<std::size_t>(n) * n);
    buf[n] = b;
    return b;
  }
  fftw_plan plan(int n, int sign) {
    auto& m = sign == FFTW_FORWARD ? fwd : bwd;
    auto it = m.find(n);
    if (it != m.end()) return it->second;
    fftw_complex* b = buffer(n);
    fftw_plan p = fftw_plan_dft_2d(n, n, b, b, sign, FFTW_ESTIMATE);
    m[n] = p;
    return p;
  }
};

PlanCache& plans() {
  static PlanCache cache;
  return cache;
}

}  // namespace

void fft2_slice_centered(GridData3& data, int a, int sign) {
  const int n = data.grid.n;
  auto& cache = plans();
  std::lock_guard<std::mutex> lock(cache.mu);
  fftw_complex* buf = cache.buffer(n);
  fftw_plan p = cache.plan(n, sign == -1 ? FFTW_FORWARD : FFTW_BACKWARD);
  const int h = n / 2;
  // ifftshift copy in: centered storage index i represents i - n/2; the
  // standard DFT index is (i - n/2) mod n = (i + n/2) mod n.
  for (int b = 0; b < n; ++b) {
    for (int c = 0; c < n; ++c) {
      Cx z = data.v[(static_cast<std::size_t>(a + h) * n + static_cast<std::size_t>(b)) * n +
                    static_cast<std::size_t>(c)];
      int bs = (b + h) % n, cs = (c + h) % n;
      buf[static_cast<std::size_t>(bs) * n + cs][0] = z.real();
      buf[static_cast<std::size_t>(bs) * n + cs][1] = z.imag();
    }
  }
  fftw_execute(p);
  const double scale = sign == -1 ? 1.0 : 1.0 / (static_cast<double>(n) * n);
  for (int b = 0; b < n; ++b) {
    for (int c = 0; c < n; ++c) {
      int bs = (b + h) % n, cs = (c + h) % n;
      data.v[(static_cast<std::size_t>(a + h) * n + static_cast<std::size_t>(b)) * n +
             static_cast<std::size_t>(c)] =
          Cx(buf[static_cast<std::size_t>(bs) * n + cs][0],
             buf[static_cast<std::size_t>(bs) * n + cs][1]) *
          scale;
    }
  }
}

double smooth_step(double r, double r0, double r1) {
  if (r <= r0) return 0.0;
  if (r >= r1) return 1.0;
  double x = (r - r0) / (r1 - r0);
  auto sigma = [](double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; };
  return sigma(x) / (sigma(x) + sigma(1.0 - x));
}

Cx GridSymbol::eval_homogeneous(const double* xi) const {
  const Grid3& g = data.grid;
  double pn = std::pow(xi[0] * xi[0] + std::pow(xi[1], 4) + std::pow(xi[2], 4), 0.25);
  if (pn == 0.0) return {0.0, 0.0};
  // Rescale onto the trusted shell at half the box pseudo-norm.
  double target = 0.5 * g.pseudo_norm_max();
  double t = target / pn;
  double sx0 = t * t * xi[0], sx1 = t * xi[1], sx2 = t * xi[2];
  // trilinear interpolation in index space
  double ia = sx0 / g.dxi0, ib = sx1 / g.dxi, ic = sx2 / g.dxi;
  auto clamp = [&](double v) {
    return std::min(std::max(v, static_cast<double>(g.lo())),
                    static_cast<double>(g.hi() - 1));
  };
  ia = clamp(ia);
  ib = clamp(ib);
  ic = clamp(ic);
  int a0 = static_cast<int>(std::floor(ia)), b0 = static_cast<int>(std::floor(ib)),
      c0 = static_cast<int>(std::floor(ic));
  double fa = ia - a0, fb = ib - b0, fc = ic - c0;
  Cx acc(0.0, 0.0);
  for (int da = 0; da <= 1; ++da)
    for (int db = 0; db <= 1; ++db)
      for (int dc = 0; dc <= 1; ++dc) {
        double w = (da ? fa : 1 - fa) * (db ? fb : 1 - fb) * (dc ? fc : 1 - fc);
        acc += w * data.at(a0 + da, b0 + db, c0 + dc);
      }
  // value(xi) = t^{-degree} value(t.xi)
  Cx tpow = std::exp(-degree * std::log(Cx(t, 0.0)));
  return tpow * acc;
}

void write_grid_binary(std::ostream& os, const GridSymbol& s) {
  std::ostringstream head;
  char buf[64];
  auto put = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    head << key << " " << buf << "\n";
  };
  head << "psicalc-grid 1\n";
  head << "n " << s.data.grid.n << "\n";
  put("dxi0", s.data.grid.dxi0);
  put("dxi", s.data.grid.dxi);
  put("degree_re", s.degree.real());
  put("degree_im", s.degree.imag());
  put("cutoff", s.cutoff_radius);
  head << "endian little\n";
  head << "data complex128 " << s.data.v.size() << "\n";
  os << head.str();
  static_assert(sizeof(Cx) == 16);
  os.write(reinterpret_cast<const char*>(s.data.v.data()),
           static_cast<std::streamsize>(s.data.v.size() * sizeof(Cx)));
}

GridSymbol read_grid_binary(std::istream& is) {
  std::string magic;
  int version = 0;
  is >> magic >> version;
  if (magic != "psicalc-grid" || version != 1)
    throw Error("not a psicalc grid file");
  GridSymbol s;
  std::size_t count = 0;
  std::string key;
  while (is >> key) {
    if (key == "n") {
      is >> s.data.grid.n;
    } else if (key == "dxi0") {
      is >> s.data.grid.dxi0;
    } else if (key == "dxi") {
      is >> s.data.grid.dxi;
    } else if (key == "degree_re") {
      double v;
      is >> v;
      s.degree = Cx(v, s.degree.imag());
    } else if (key == "degree_im") {
      double v;
      is >> v;
      s.degree = Cx(s.degree.real(), v);
    } else if (key == "cutoff") {
      is >> s.cutoff_radius;
    } else if (key == "endian") {
      std::string e;
      is >> e;
      if (e != "little") throw Error("unsupported endianness");
    } else if (key == "data") {
      std::string type;
      is >> type >> count;
      if (type != "complex128") throw Error("unsupported payload type");
      break;
    } else {
      throw Error("unknown grid header key: " + key);
    }
  }
  is.get();  // newline before payload
  s.data.v.resize(count);
  is.read(reinterpret_cast<char*>(s.data.v.data()),
          static_cast<std::streamsize>(count * sizeof(Cx)));
  if (!is) throw Error("truncated grid payload");
  return s;
}

std::string shell_report_csv(const GridSymbol& s, int shells) {
  const Grid3& g = s.data.grid;
  double pmax = g.pseudo_norm_max();
  std::vector<double> maxmod(static_cast<std::size_t>(shells), 0.0);
  std::vector<double> summod(static_cast<std::size_t>(shells), 0.0);
  std::vector<long> count(static_cast<std::size_t>(shells), 0);
  for (int a = g.lo(); a <= g.hi(); ++a)
    for (int b = g.lo(); b <= g.hi(); ++b)
      for (int c = g.lo(); c <= g.hi(); ++c) {
        double pn = g.pseudo_norm_at(a, b, c);
        int sh = static_cast<int>(pn / pmax * shells);
        if (sh < 0 || sh >= shells) continue;
        double m = std::abs(s.data.at(a, b, c));
        maxmod[static_cast<std::size_t>(sh)] = std::max(maxmod[static_cast<std::size_t>(sh)], m);
        summod[static_cast<std::size_t>(sh)] += m;
        ++count[static_cast<std::size_t>(sh)];
      }
  std::ostringstream os;
  os << "shell,pseudo_norm_lo,pseudo_norm_hi,count,max_modulus,mean_modulus\n";
  char buf[64];
  for (int i = 0; i < shells; ++i) {
    double lo = pmax * i / shells, hi = pmax * (i + 1) / shells;
    os << i << ",";
    std::snprintf(buf, sizeof buf, "%.17g", lo);
    os << buf << ",";
    std::snprintf(buf, sizeof buf, "%.17g", hi);
    os << buf << "," << count[static_cast<std::size_t>(i)] << ",";
    std::snprintf(buf, sizeof buf, "%.17g", maxmod[static_cast<std::size_t>(i)]);
    os << buf << ",";
    double mean = count[static_cast<std::size_t>(i)]
                      ? summod[static_cast<std::size_t>(i)] / count[static_cast<std::size_t>(i)]
                      : 0.0;
    std::snprintf(buf, sizeof buf, "%.17g", mean);
    os << buf << "\n";
  }
  return os.str();
}

}  // namespace psicalc
