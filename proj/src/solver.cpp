#include "tfus/solver.hpp"

#include <fftw3.h>
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <sstream>

#include "tfus/error.hpp"

namespace tfus {

namespace {

using cfloat = std::complex<float>;

std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}

void init_fftw_threads()
{
    static std::once_flag once;
    std::call_once(once, [] { fftwf_init_threads(); });
}

template <typename T>
struct FftwDeleter {
    void operator()(T* p) const { fftwf_free(p); }
};

template <typename T>
class AlignedBuffer {
public:
    AlignedBuffer() = default;
    explicit AlignedBuffer(std::size_t n) : n_(n), p_(static_cast<T*>(fftwf_malloc(sizeof(T) * std::max<std::size_t>(n, 1))))
    {
        if (!p_) throw NumericalError("solver: allocation failed");
        std::fill(p_.get(), p_.get() + n_, T{});
    }
    T* data() { return p_.get(); }
    const T* data() const { return p_.get(); }
    T& operator[](std::size_t i) { return p_.get()[i]; }
    const T& operator[](std::size_t i) const { return p_.get()[i]; }
    std::size_t size() const { return n_; }

private:
    std::size_t n_ = 0;
    std::unique_ptr<T, FftwDeleter<T>> p_;
};

struct PlanDeleter {
    void operator()(fftwf_plan_s* p) const
    {
        std::lock_guard lock(planner_mutex());
        fftwf_destroy_plan(p);
    }
};
using Plan = std::unique_ptr<fftwf_plan_s, PlanDeleter>;

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

// Source term: voxel index, per-step scale (kg/m^3 per Pa) and drive.
struct SourcePoint {
    std::size_t voxel;
    double scale;
    double amplitude;
    double phase;
};

/// Owns the fields, operators and FFT plans of one run.
class KSpaceSolver {
public:
    KSpaceSolver(const Medium& medium, const SimParams& params);

    double dt() const { return dt_; }
    std::size_t voxels() const { return n_; }
    double ppw() const { return ppw_; }

    void add_sources(const std::vector<SourcePoint>& pts) { sources_ = pts; }
    void set_source_cutoff(double t) { source_cutoff_ = t; }

    // Advances one step; afterwards pressure() holds p at t = (step + 1) dt.
    void step(int step_index);

    const float* pressure() const { return p_.data(); }
    // Leapfrog-conserved energy at t = n dt: potential energy of rho^n plus the
    // kinetic term u^(n-1/2) . u^(n+1/2). Call begin_energy() before step n and
    // energy() after it.
    void begin_energy();
    double energy() const;
    void check_finite(int step_index) const;

private:
    void build_operators(const Medium& medium);
    void build_pml();

    SimParams params_;
    std::array<int, 3> dims_{};
    std::vector<int> active_;
    std::size_t n_ = 0;
    std::size_t nk_ = 0;
    int nxk_ = 0;
    double dx_ = 0.0; // m
    double dt_ = 0.0;
    double c_ref_ = 0.0;
    double ppw_ = 0.0;
    double source_cutoff_ = -1.0;

    AlignedBuffer<float> p_, scratch_, rho0_, c2_, damp_;
    std::array<AlignedBuffer<float>, 3> u_, rho_, inv_rho_sg_, u_prev_;
    double potential_ = 0.0;
    AlignedBuffer<cfloat> pk_, tk_;
    AlignedBuffer<float> kappa_;
    std::array<std::vector<cfloat>, 3> op_pos_, op_neg_;
    std::array<std::vector<float>, 3> pml_, pml_sg_;
    Plan fwd_, inv_;
    std::vector<SourcePoint> sources_;
};

KSpaceSolver::KSpaceSolver(const Medium& medium, const SimParams& params) : params_(params)
{
    const auto& g = medium.grid();
    dims_ = g.dims;
    n_ = g.size();
    for (int a = 0; a < 3; ++a)
        if (dims_[a] > 1) active_.push_back(a);
    if (active_.empty()) throw DataError("simulate: grid has no extent");
    for (int a : active_)
        if (std::abs(g.spacing[a] - g.spacing[active_[0]]) > 1e-9 * g.spacing[active_[0]])
            throw DataError("simulate: grid spacing must be isotropic over the active axes");
    dx_ = g.spacing[active_[0]] * 1e-3;

    const double c_max = medium.c.max();
    const double c_min = medium.c.min();
    if (!(c_min > 0.0)) throw DataError("simulate: sound speed must be positive everywhere");
    c_ref_ = std::max(medium.c_ref, c_max);
    dt_ = params_.cfl * dx_ / c_ref_;
    ppw_ = c_min / (params_.f0 * dx_);

    nxk_ = dims_[0] / 2 + 1;
    nk_ = static_cast<std::size_t>(nxk_) * dims_[1] * dims_[2];

    p_ = AlignedBuffer<float>(n_);
    scratch_ = AlignedBuffer<float>(n_);
    rho0_ = AlignedBuffer<float>(n_);
    c2_ = AlignedBuffer<float>(n_);
    damp_ = AlignedBuffer<float>(n_);
    for (int a : active_) {
        u_[a] = AlignedBuffer<float>(n_);
        rho_[a] = AlignedBuffer<float>(n_);
        inv_rho_sg_[a] = AlignedBuffer<float>(n_);
    }
    pk_ = AlignedBuffer<cfloat>(nk_);
    tk_ = AlignedBuffer<cfloat>(nk_);
    kappa_ = AlignedBuffer<float>(nk_);

    build_operators(medium);
    build_pml();

    init_fftw_threads();
    std::lock_guard lock(planner_mutex());
    fftwf_plan_with_nthreads(omp_get_max_threads());
    // FFTW_ESTIMATE keeps plan selection (and so rounding) reproducible.
    fwd_.reset(fftwf_plan_dft_r2c_3d(dims_[2], dims_[1], dims_[0], scratch_.data(),
                                     reinterpret_cast<fftwf_complex*>(pk_.data()), FFTW_ESTIMATE));
    inv_.reset(fftwf_plan_dft_c2r_3d(dims_[2], dims_[1], dims_[0], reinterpret_cast<fftwf_complex*>(tk_.data()),
                                     scratch_.data(), FFTW_ESTIMATE));
    if (!fwd_ || !inv_) throw NumericalError("simulate: FFT planning failed");
}

void KSpaceSolver::build_operators(const Medium& medium)
{
    const double omega = 2.0 * kPi * params_.f0;
    for (std::size_t i = 0; i < n_; ++i) {
        const double c = medium.c[i];
        rho0_[i] = medium.rho[i];
        c2_[i] = static_cast<float>(c * c);
        const double eta = damping_rate(medium.alpha_np[i], c, omega);
        damp_[i] = static_cast<float>(std::exp(-0.5 * eta * dt_));
    }
    const GridGeometry& g = medium.grid();
    for (int a : active_) {
        std::array<int, 3> step{0, 0, 0};
        step[a] = 1;
        for (int k = 0; k < dims_[2]; ++k)
            for (int j = 0; j < dims_[1]; ++j)
                for (int i = 0; i < dims_[0]; ++i) {
                    const int ni = (i + step[0]) % dims_[0];
                    const int nj = (j + step[1]) % dims_[1];
                    const int nk = (k + step[2]) % dims_[2];
                    const std::size_t idx = g.index(i, j, k);
                    const double rs = 0.5 * (static_cast<double>(medium.rho[idx]) + medium.rho[g.index(ni, nj, nk)]);
                    inv_rho_sg_[a][idx] = static_cast<float>(1.0 / rs);
                }
    }

    // Wavenumbers along each axis; axis 0 is the halved r2c axis.
    std::array<std::vector<double>, 3> kvec;
    for (int a = 0; a < 3; ++a) {
        const int n = dims_[a];
        const int len = a == 0 ? nxk_ : n;
        kvec[a].resize(len);
        for (int j = 0; j < len; ++j) {
            const int m = (j <= (n - 1) / 2 || a == 0) ? j : j - n;
            kvec[a][j] = 2.0 * kPi * m / (n * dx_);
        }
        op_pos_[a].assign(len, cfloat{});
        op_neg_[a].assign(len, cfloat{});
        if (n == 1) continue;
        // The half-cell shift makes the Nyquist entry real, so it is kept.
        for (int j = 0; j < len; ++j) {
            const double k = kvec[a][j];
            const std::complex<double> ik{0.0, k};
            op_pos_[a][j] = cfloat(ik * std::exp(std::complex<double>{0.0, 0.5 * k * dx_}));
            op_neg_[a][j] = cfloat(ik * std::exp(std::complex<double>{0.0, -0.5 * k * dx_}));
        }
    }
    // k-space correction with the inverse-FFT normalisation folded in.
    const double inv_n = 1.0 / static_cast<double>(n_);
    for (int k = 0; k < dims_[2]; ++k)
        for (int j = 0; j < dims_[1]; ++j)
            for (int i = 0; i < nxk_; ++i) {
                const double kk = std::sqrt(kvec[0][i] * kvec[0][i] + kvec[1][j] * kvec[1][j] + kvec[2][k] * kvec[2][k]);
                const std::size_t idx = static_cast<std::size_t>(i) + static_cast<std::size_t>(nxk_) * (j + static_cast<std::size_t>(dims_[1]) * k);
                kappa_[idx] = static_cast<float>(sinc(0.5 * c_ref_ * kk * dt_) * inv_n);
            }
}

void KSpaceSolver::build_pml()
{
    const int t = params_.pml_thickness;
    for (int a = 0; a < 3; ++a) {
        const int n = dims_[a];
        pml_[a].assign(n, 1.0f);
        pml_sg_[a].assign(n, 1.0f);
        if (n == 1 || t <= 0 || !params_.pml_axes[a]) continue;
        const double sigma_max = params_.pml_alpha * c_ref_ / dx_;
        const auto factor = [&](double profile) {
            return static_cast<float>(std::exp(-0.5 * sigma_max * std::pow(profile, 4) * dt_));
        };
        for (int i = 0; i < t && i < n; ++i) {
            pml_[a][i] = factor(static_cast<double>(t - i) / t);
            pml_sg_[a][i] = factor((t - i - 0.5) / t);
            const int r = n - t + i;
            if (r >= 0) {
                pml_[a][r] = factor(static_cast<double>(i + 1) / t);
                pml_sg_[a][r] = factor((i + 1.5) / t);
            }
        }
    }
}

void KSpaceSolver::step(int step_index)
{
    const int ny = dims_[1], nz = dims_[2];
    const auto dt = static_cast<float>(dt_);
    auto* pk = reinterpret_cast<fftwf_complex*>(pk_.data());
    auto* tk = reinterpret_cast<fftwf_complex*>(tk_.data());

    // Complex products are spelled out: std::complex multiplication carries a
    // NaN-recovery branch that stops the loops from vectorizing.
    const auto spectral_multiply = [&](const std::vector<cfloat>& op, int axis) {
#pragma omp parallel for schedule(static)
        for (int k = 0; k < nz; ++k)
            for (int j = 0; j < ny; ++j) {
                const std::size_t row = static_cast<std::size_t>(nxk_) * (j + static_cast<std::size_t>(ny) * k);
                const float* in = reinterpret_cast<const float*>(pk_.data() + row);
                const float* kap = kappa_.data() + row;
                float* out = reinterpret_cast<float*>(tk_.data() + row);
                if (axis == 0) {
                    const float* o = reinterpret_cast<const float*>(op.data());
                    for (int i = 0; i < nxk_; ++i) {
                        const float re = in[2 * i], im = in[2 * i + 1];
                        out[2 * i] = kap[i] * (re * o[2 * i] - im * o[2 * i + 1]);
                        out[2 * i + 1] = kap[i] * (re * o[2 * i + 1] + im * o[2 * i]);
                    }
                } else {
                    const cfloat o = axis == 1 ? op[j] : op[k];
                    const float ore = o.real(), oim = o.imag();
                    for (int i = 0; i < nxk_; ++i) {
                        const float re = in[2 * i], im = in[2 * i + 1];
                        out[2 * i] = kap[i] * (re * ore - im * oim);
                        out[2 * i + 1] = kap[i] * (re * oim + im * ore);
                    }
                }
            }
    };
    // out = f * (f * out - dt * coef * scratch) with f = pml(axis) * extra.
    const auto update = [&](float* out, const float* coef, const float* extra, const std::vector<float>& pml,
                            int axis) {
        const int nx = dims_[0];
#pragma omp parallel for schedule(static)
        for (int k = 0; k < nz; ++k)
            for (int j = 0; j < ny; ++j) {
                const std::size_t row = static_cast<std::size_t>(nx) * (j + static_cast<std::size_t>(ny) * k);
                const float* d = scratch_.data() + row;
                const float* c = coef + row;
                float* o = out + row;
                if (axis == 0) {
                    const float* px = pml.data();
                    if (extra) {
                        const float* e = extra + row;
                        for (int i = 0; i < nx; ++i) {
                            const float f = px[i] * e[i];
                            o[i] = f * (f * o[i] - dt * c[i] * d[i]);
                        }
                    } else {
                        for (int i = 0; i < nx; ++i) o[i] = px[i] * (px[i] * o[i] - dt * c[i] * d[i]);
                    }
                } else {
                    const float line = axis == 1 ? pml[j] : pml[k];
                    if (extra) {
                        const float* e = extra + row;
                        for (int i = 0; i < nx; ++i) {
                            const float f = line * e[i];
                            o[i] = f * (f * o[i] - dt * c[i] * d[i]);
                        }
                    } else {
                        for (int i = 0; i < nx; ++i) o[i] = line * (line * o[i] - dt * c[i] * d[i]);
                    }
                }
            }
    };

    // Momentum: u -= dt / rho0 * dp/dx (staggered +dx/2). Out-of-place r2c
    // leaves its input intact, so the fields are transformed in place of a copy.
    fftwf_execute_dft_r2c(fwd_.get(), p_.data(), pk);
    for (int a : active_) {
        spectral_multiply(op_pos_[a], a);
        fftwf_execute_dft_c2r(inv_.get(), tk, scratch_.data());
        update(u_[a].data(), inv_rho_sg_[a].data(), nullptr, pml_sg_[a], a);
    }

    // Mass conservation, split per axis (-dx/2 shift), with absorption damping.
    for (int a : active_) {
        fftwf_execute_dft_r2c(fwd_.get(), u_[a].data(), pk);
        spectral_multiply(op_neg_[a], a);
        fftwf_execute_dft_c2r(inv_.get(), tk, scratch_.data());
        update(rho_[a].data(), rho0_.data(), damp_.data(), pml_[a], a);
    }

    // Mass is injected over [t_n, t_n+1], so the drive is sampled at the midpoint.
    const double t = (step_index + 0.5) * dt_;
    if (source_cutoff_ < 0.0 || t <= source_cutoff_) {
        const double omega = 2.0 * kPi * params_.f0;
        for (const auto& s : sources_) {
            const auto v = static_cast<float>(s.scale * s.amplitude * std::cos(omega * t + s.phase));
            for (int a : active_) rho_[a][s.voxel] += v;
        }
    }

    const std::size_t n = n_;
    float* p = p_.data();
    const float* c2 = c2_.data();
    if (active_.size() == 3) {
        const float *r0 = rho_[0].data(), *r1 = rho_[1].data(), *r2 = rho_[2].data();
#pragma omp parallel for schedule(static)
        for (std::size_t i = 0; i < n; ++i) p[i] = c2[i] * (r0[i] + r1[i] + r2[i]);
    } else {
#pragma omp parallel for schedule(static)
        for (std::size_t i = 0; i < n; ++i) {
            float sum = 0.0f;
            for (int a : active_) sum += rho_[a][i];
            p[i] = c2[i] * sum;
        }
    }
}

void KSpaceSolver::begin_energy()
{
    double e = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        double rho_tot = 0.0;
        for (int a : active_) rho_tot += rho_[a][i];
        e += c2_[i] * rho_tot * rho_tot / (2.0 * rho0_[i]);
    }
    potential_ = e;
    for (int a : active_) {
        if (u_prev_[a].size() != n_) u_prev_[a] = AlignedBuffer<float>(n_);
        std::copy(u_[a].data(), u_[a].data() + n_, u_prev_[a].data());
    }
}

double KSpaceSolver::energy() const
{
    double kin = 0.0;
    for (int a : active_)
        for (std::size_t i = 0; i < n_; ++i)
            kin += 0.5 * static_cast<double>(u_prev_[a][i]) * u_[a][i] / inv_rho_sg_[a][i];
    return (potential_ + kin) * std::pow(dx_, static_cast<double>(active_.size()));
}

void KSpaceSolver::check_finite(int step_index) const
{
    for (std::size_t i = 0; i < n_; ++i) {
        if (!std::isfinite(p_[i])) {
            std::ostringstream msg;
            msg << "simulate: numerical instability (non-finite pressure) at step " << step_index;
            throw NumericalError(msg.str());
        }
    }
}

std::vector<SourcePoint> source_points(const Medium& medium, const SourceMap& sources, const SourceDrive& drive,
                                       const SimParams& params, double dt, int n_active)
{
    const double dx = medium.grid().spacing[0] * 1e-3;
    std::vector<SourcePoint> pts;
    for (std::size_t e = 0; e < sources.element_count(); ++e) {
        for (std::size_t v : sources.element_voxels[e]) {
            const double c = medium.c[v];
            pts.push_back({v, 2.0 * dt / (n_active * c * dx), drive.amplitude[e] * params.amplitude, drive.phase[e]});
        }
    }
    return pts;
}

int active_dims(const GridGeometry& g)
{
    int n = 0;
    for (int a = 0; a < 3; ++a)
        if (g.dims[a] > 1) ++n;
    return n;
}

void check_sources_outside_pml(const GridGeometry& g, const SourceMap& sources, const SimParams& params)
{
    const int t = params.pml_thickness;
    for (std::size_t idx = 0; idx < sources.labels.size(); ++idx) {
        if (sources.labels[idx] < 0) continue;
        const auto c = g.coords(idx);
        for (int a = 0; a < 3; ++a) {
            if (g.dims[a] == 1 || !params.pml_axes[a]) continue;
            if (c[a] < t || c[a] >= g.dims[a] - t) {
                std::ostringstream msg;
                msg << "simulate: source voxel of element " << sources.labels[idx] << " lies inside the PML";
                throw DataError(msg.str());
            }
        }
    }
}

void check_ppw(double ppw, const SimParams& params, std::vector<std::string>& warnings)
{
    if (ppw < 2.0) {
        std::ostringstream msg;
        msg << "simulate: " << ppw << " points per wavelength is below the hard minimum of 2";
        throw NumericalError(msg.str());
    }
    if (ppw < params.ppw_min) {
        std::ostringstream msg;
        msg << "points per wavelength " << ppw << " below " << params.ppw_min;
        warnings.push_back(msg.str());
    }
}

} // namespace

void SimParams::validate() const
{
    if (!(f0 > 0.0)) throw ConfigError("sim: f0 must be positive");
    if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("sim: cfl must lie in (0, 1]");
    if (n_cycles < 1) throw ConfigError("sim: n_cycles must be >= 1");
    if (rms_window_cycles < 1) throw ConfigError("sim: rms_window_cycles must be >= 1");
    if (n_cycles < rms_window_cycles) throw ConfigError("sim: n_cycles must be >= rms_window_cycles");
    if (pml_thickness < 0) throw ConfigError("sim: pml_thickness must be >= 0");
    if (pml_alpha < 0.0) throw ConfigError("sim: pml_alpha must be >= 0");
    if (!std::isfinite(amplitude)) throw ConfigError("sim: amplitude must be finite");
}

SourceDrive SourceDrive::uniform(std::size_t n, double amplitude)
{
    return {std::vector<double>(n, amplitude), std::vector<double>(n, 0.0)};
}

double damping_rate(double alpha_np, double c, double omega)
{
    if (alpha_np <= 0.0) return 0.0;
    const double a = alpha_np * c / omega;
    return 2.0 * alpha_np * c * std::sqrt(1.0 + a * a);
}

double stable_time_step(const Medium& medium, const SimParams& params)
{
    const auto& g = medium.grid();
    double dx = 0.0;
    for (int a = 0; a < 3; ++a)
        if (g.dims[a] > 1) dx = g.spacing[a] * 1e-3;
    if (dx == 0.0) dx = g.spacing[0] * 1e-3;
    const double c_ref = std::max(medium.c_ref, static_cast<double>(medium.c.max()));
    return params.cfl * dx / c_ref;
}

int total_steps(double dt, const SimParams& params)
{
    return static_cast<int>(std::ceil(params.n_cycles / (params.f0 * dt) - 1e-9));
}

PressureField simulate(const Medium& medium, const SourceMap& sources, const SourceDrive& drive,
                       const SimParams& params, const SimOptions& options)
{
    params.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const auto& g = medium.grid();
    if (!same_grid(g, sources.mask.grid())) throw DataError("simulate: source map and medium grids differ");
    if (drive.amplitude.size() != sources.element_count() || drive.phase.size() != sources.element_count())
        throw DataError("simulate: drive length does not match the element count");
    for (std::size_t e = 0; e < drive.amplitude.size(); ++e)
        if (!std::isfinite(drive.amplitude[e]) || !std::isfinite(drive.phase[e]))
            throw DataError("simulate: drive amplitudes and phases must be finite");
    check_sources_outside_pml(g, sources, params);

    PressureField out;
    out.params = params;
    KSpaceSolver solver(medium, params);
    out.dt = solver.dt();
    out.ppw = solver.ppw();
    out.c_ref = std::max(medium.c_ref, static_cast<double>(medium.c.max()));
    check_ppw(out.ppw, params, out.warnings);

    out.steps = total_steps(out.dt, params);
    out.rms_steps = std::min(out.steps, static_cast<int>(std::lround(params.rms_window_cycles / (params.f0 * out.dt))));
    const int rms_start = out.steps - out.rms_steps;

    solver.add_sources(source_points(medium, sources, drive, params, out.dt, active_dims(g)));
    if (options.source_off_cycles > 0.0) solver.set_source_cutoff(options.source_off_cycles / params.f0);

    out.probe_series.assign(options.probe_voxels.size(), std::vector<float>{0.0f});
    for (auto v : options.probe_voxels)
        if (v >= g.size()) throw DataError("simulate: probe voxel outside the grid");

    std::vector<double> sum_sq(g.size(), 0.0);
    for (int n = 0; n < out.steps; ++n) {
        if (options.record_energy) solver.begin_energy();
        solver.step(n);
        const float* p = solver.pressure();
        if ((n + 1) % 64 == 0 || n + 1 == out.steps) solver.check_finite(n + 1);
        if (n >= rms_start) {
#pragma omp parallel for schedule(static)
            for (std::size_t i = 0; i < g.size(); ++i) sum_sq[i] += static_cast<double>(p[i]) * p[i];
        }
        for (std::size_t q = 0; q < options.probe_voxels.size(); ++q)
            out.probe_series[q].push_back(p[options.probe_voxels[q]]);
        if (options.record_energy) out.energy.push_back(solver.energy());
    }

    out.rms = Volume(g);
    const double inv = 1.0 / std::max(out.rms_steps, 1);
    for (std::size_t i = 0; i < g.size(); ++i) out.rms[i] = static_cast<float>(std::sqrt(sum_sq[i] * inv));
    out.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

ElementRecordings record_point_source(const Medium& medium, WorldPoint target, const SourceMap& elements,
                                      const SimParams& params)
{
    params.validate();
    const auto& g = medium.grid();
    if (!same_grid(g, elements.mask.grid())) throw DataError("record_point_source: element map and medium grids differ");
    const Vec3 idx = g.to_index(target);
    const int i = static_cast<int>(std::lround(idx.x));
    const int j = static_cast<int>(std::lround(idx.y));
    const int k = static_cast<int>(std::lround(idx.z));
    if (!g.contains(i, j, k)) throw DataError("record_point_source: target outside the grid");
    const std::size_t voxel = g.index(i, j, k);
    if (medium.brain_mask[voxel] == 0.0f) throw DataError("record_point_source: target outside the brain region");

    KSpaceSolver solver(medium, params);
    std::vector<std::string> warnings;
    check_ppw(solver.ppw(), params, warnings);
    const double dt = solver.dt();
    const int steps = total_steps(dt, params);
    const int dims = active_dims(g);
    // Mass-source radiation carries a (D-1)/4 period lead; cancel it.
    const double phase = -0.25 * kPi * (dims - 1);
    const double dx = g.spacing[0] * 1e-3;
    solver.add_sources({{voxel, 2.0 * dt / (dims * medium.c[voxel] * dx), params.amplitude, phase}});

    ElementRecordings rec;
    rec.dt = dt;
    rec.f0 = params.f0;
    rec.series.resize(elements.element_count());
    for (std::size_t e = 0; e < elements.element_count(); ++e) {
        rec.series[e].assign(elements.element_voxels[e].size(), std::vector<float>{});
        for (auto& s : rec.series[e]) {
            s.reserve(static_cast<std::size_t>(steps) + 1);
            s.push_back(0.0f);
        }
    }
    for (int n = 0; n < steps; ++n) {
        solver.step(n);
        const float* p = solver.pressure();
        if ((n + 1) % 64 == 0 || n + 1 == steps) solver.check_finite(n + 1);
        for (std::size_t e = 0; e < elements.element_count(); ++e)
            for (std::size_t v = 0; v < elements.element_voxels[e].size(); ++v)
                rec.series[e][v].push_back(p[elements.element_voxels[e][v]]);
    }
    return rec;
}

AmpPhase extract_amp_phase(std::span<const float> series, double f0, double dt)
{
    if (!(f0 > 0.0) || !(dt > 0.0)) throw DataError("extract_amp_phase: f0 and dt must be positive");
    const std::size_t n = series.size();
    const double samples_per_period = 1.0 / (f0 * dt);
    if (static_cast<double>(n) < 3.0 * samples_per_period - 1e-9)
        throw DataError("extract_amp_phase: series shorter than three carrier periods");

    const std::size_t available = n - n / 3;
    const double periods = std::floor(static_cast<double>(available) / samples_per_period + 1e-9);
    std::size_t m = static_cast<std::size_t>(std::lround(periods * samples_per_period));
    m = std::clamp<std::size_t>(m, 2, available);
    const std::size_t start = n - m;

    const double omega = 2.0 * kPi * f0;
    std::complex<double> acc{};
    double wsum = 0.0;
    for (std::size_t q = 0; q < m; ++q) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(q) / static_cast<double>(m));
        const double t = static_cast<double>(start + q) * dt;
        acc += w * static_cast<double>(series[start + q]) * std::polar(1.0, -omega * t);
        wsum += w;
    }
    return {2.0 * std::abs(acc) / wsum, std::arg(acc)};
}

int fft_friendly_size(int n)
{
    for (int m = std::max(n, 1);; ++m) {
        int r = m;
        for (int p : {2, 3, 5})
            while (r % p == 0) r /= p;
        if (r == 1) return m;
    }
}

void set_thread_count(int threads)
{
    if (threads < 1) throw ConfigError("thread count must be >= 1");
    omp_set_num_threads(threads);
}

} // namespace tfus
