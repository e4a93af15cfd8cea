#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "aenode/common.hpp"
#include "aenode/model.hpp"
#include "aenode/rng.hpp"

namespace aenode {

// ---------------------------------------------------------------------------
// Histogram estimators (bits). The binned route is the sanity baseline;
// the matrix-based Renyi estimator below is the primary instrument
// because binned MI depends on the bin-size choice.
// ---------------------------------------------------------------------------

inline int freedman_diaconis_bins(std::vector<double> samples, int min_bins = 8, int max_bins = 512) {
    if (samples.empty()) throw DomainError("freedman_diaconis_bins: empty sample");
    std::sort(samples.begin(), samples.end());
    const auto quantile = [&](double q) {
        const double pos = q * (samples.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const double frac = pos - lo;
        return lo + 1 < samples.size() ? samples[lo] * (1 - frac) + samples[lo + 1] * frac : samples[lo];
    };
    const double iqr = quantile(0.75) - quantile(0.25);
    const double range = samples.back() - samples.front();
    const double width = 2.0 * iqr * std::pow(static_cast<double>(samples.size()), -1.0 / 3.0);
    if (width <= 0.0 || range <= 0.0) return min_bins;
    return std::clamp(static_cast<int>(std::ceil(range / width)), min_bins, max_bins);
}

namespace detail {

inline std::vector<double> hist_probs(const std::vector<double>& samples, double lo, double hi, int bins) {
    std::vector<double> p(bins, 0.0);
    const double width = hi - lo;
    for (double x : samples) {
        int b = width > 0 ? static_cast<int>((x - lo) / width * bins) : 0;
        b = std::clamp(b, 0, bins - 1);
        p[b] += 1.0;
    }
    for (double& v : p) v /= samples.size();
    return p;
}

}  // namespace detail

/// -sum p log2 p over occupied bins of a uniform histogram.
inline double shannon_entropy_hist(const std::vector<double>& samples, int bins,
                                   bool* single_bin = nullptr) {
    if (samples.empty()) throw DomainError("shannon_entropy_hist: empty sample");
    if (bins < 2) throw ConfigError("shannon_entropy_hist: bins must be >= 2");
    const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
    if (single_bin) *single_bin = (*lo_it == *hi_it);
    if (*lo_it == *hi_it) return 0.0;
    const auto p = detail::hist_probs(samples, *lo_it, *hi_it, bins);
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log2(v);
    return h;
}

/// Binned KL divergence D(p||q) in bits over a shared binning. Bins of q
/// that are empty where p has mass get epsilon smoothing (flagged).
inline double kl_divergence_hist(const std::vector<double>& p_samples,
                                 const std::vector<double>& q_samples, int bins,
                                 bool* smoothed = nullptr) {
    if (p_samples.empty() || q_samples.empty()) throw DomainError("kl_divergence_hist: empty sample");
    if (bins < 2) throw ConfigError("kl_divergence_hist: bins must be >= 2");
    double lo = *std::min_element(p_samples.begin(), p_samples.end());
    double hi = *std::max_element(p_samples.begin(), p_samples.end());
    lo = std::min(lo, *std::min_element(q_samples.begin(), q_samples.end()));
    hi = std::max(hi, *std::max_element(q_samples.begin(), q_samples.end()));
    if (lo == hi) {
        if (smoothed) *smoothed = false;
        return 0.0;
    }
    auto p = detail::hist_probs(p_samples, lo, hi, bins);
    auto q = detail::hist_probs(q_samples, lo, hi, bins);
    bool needs_smoothing = false;
    for (int b = 0; b < bins; ++b)
        if (p[b] > 0.0 && q[b] == 0.0) needs_smoothing = true;
    if (needs_smoothing) {
        constexpr double eps = 1e-12;
        double total = 0.0;
        for (double& v : q) total += (v += eps);
        for (double& v : q) v /= total;
    }
    if (smoothed) *smoothed = needs_smoothing;
    double kl = 0.0;
    for (int b = 0; b < bins; ++b)
        if (p[b] > 0.0) kl += p[b] * std::log2(p[b] / q[b]);
    return kl;
}

/// Joint/marginal histogram mutual information in bits. Marginals are
/// taken from the joint binning, so I(X;X) = H(X) holds exactly.
inline double mi_hist(const std::vector<double>& x, const std::vector<double>& y, int bins) {
    if (x.size() != y.size()) throw ShapeError("mi_hist: sample length mismatch");
    if (x.empty()) throw DomainError("mi_hist: empty sample");
    if (bins < 2) throw ConfigError("mi_hist: bins must be >= 2");
    const auto [xlo, xhi] = std::minmax_element(x.begin(), x.end());
    const auto [ylo, yhi] = std::minmax_element(y.begin(), y.end());
    const double xw = *xhi - *xlo, yw = *yhi - *ylo;
    std::vector<double> joint(static_cast<std::size_t>(bins) * bins, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        int bx = xw > 0 ? std::clamp(static_cast<int>((x[i] - *xlo) / xw * bins), 0, bins - 1) : 0;
        int by = yw > 0 ? std::clamp(static_cast<int>((y[i] - *ylo) / yw * bins), 0, bins - 1) : 0;
        joint[static_cast<std::size_t>(bx) * bins + by] += 1.0;
    }
    for (double& v : joint) v /= x.size();
    std::vector<double> px(bins, 0.0), py(bins, 0.0);
    for (int bx = 0; bx < bins; ++bx)
        for (int by = 0; by < bins; ++by) {
            px[bx] += joint[static_cast<std::size_t>(bx) * bins + by];
            py[by] += joint[static_cast<std::size_t>(bx) * bins + by];
        }
    double mi = 0.0;
    for (int bx = 0; bx < bins; ++bx)
        for (int by = 0; by < bins; ++by) {
            const double pxy = joint[static_cast<std::size_t>(bx) * bins + by];
            if (pxy > 0.0) mi += pxy * std::log2(pxy / (px[bx] * py[by]));
        }
    return mi;
}

// ---------------------------------------------------------------------------
// Matrix-based Renyi entropy: trace-normalized Gram matrix of a
// positive-definite, infinitely divisible kernel; entropy from its
// eigenvalue spectrum.
// ---------------------------------------------------------------------------

/// sigma = h * n^(-1/(4+d)), Silverman's rule.
inline double silverman_sigma(long n, int d, double h) {
    if (n < 1 || d < 1) throw ConfigError("silverman_sigma: n and d must be >= 1");
    if (h <= 0.0) throw ConfigError("silverman_sigma: h must be positive");
    return h * std::pow(static_cast<double>(n), -1.0 / (4.0 + d));
}

/// Empirical constant for a sample set: 1.06 * sqrt(total variance).
/// Reduces to the classical 1.06*std at d = 1 and grows ~sqrt(d), which
/// keeps the kernel informative for wide layers instead of collapsing
/// towards a Kronecker delta.
inline double silverman_h(const Mat& samples) {
    if (samples.rows() < 2) return 0.0;
    double total_var = 0.0;
    for (int j = 0; j < samples.cols(); ++j) {
        const double mean = samples.col(j).mean();
        total_var += (samples.col(j).array() - mean).square().sum() / (samples.rows() - 1);
    }
    return 1.06 * std::sqrt(total_var);
}

/// Trace-one normalized positive-definite matrix with its clamped
/// eigenvalue spectrum (descending).
struct NpdMatrix {
    Mat entries;
    Vec eigenvalues;

    long size() const { return entries.rows(); }

    static NpdMatrix from_symmetric(Mat a) {
        const double tr = a.trace();
        if (!(tr > 0.0)) throw DomainError("NpdMatrix: non-positive trace");
        a /= tr;
        Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
        NpdMatrix npd;
        npd.entries = std::move(a);
        npd.eigenvalues = es.eigenvalues().reverse();
        // negatives are eigensolver noise (A is NPD analytically); values
        // below the rank threshold are noise too and would otherwise leak
        // into fractional powers lambda^alpha for alpha < 1
        const double floor = npd.eigenvalues.size() * 2.3e-16 * std::max(npd.eigenvalues(0), 0.0);
        for (long i = 0; i < npd.eigenvalues.size(); ++i)
            if (npd.eigenvalues(i) < floor) npd.eigenvalues(i) = 0.0;
        return npd;
    }
};

/// Gaussian-kernel Gram matrix A_ij = K_ij / (N sqrt(K_ii K_jj)) with
/// K_ij = exp(-|x_i - x_j|^2 / (2 sigma^2)). Coincident points always
/// get K = 1, so sigma = 0 degenerates to I/N for distinct points.
inline NpdMatrix gram_npd(const Mat& samples, double sigma) {
    const long n = samples.rows();
    if (n < 2) throw ConfigError("gram_npd: need at least 2 samples");
    if (!all_finite(samples)) throw DomainError("gram_npd: non-finite samples");
    if (sigma < 0.0) throw ConfigError("gram_npd: sigma must be >= 0");
    Mat k(n, n);
    const double denom = 2.0 * sigma * sigma;
    for (long i = 0; i < n; ++i) {
        k(i, i) = 1.0;
        for (long j = i + 1; j < n; ++j) {
            const double d2 = (samples.row(i) - samples.row(j)).squaredNorm();
            const double v = d2 == 0.0 ? 1.0 : std::exp(-d2 / denom);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    // K_ii = 1, so the Eq.-style normalization is just K/N; keep the
    // general form against future kernels.
    Mat a(n, n);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) a(i, j) = k(i, j) / (n * std::sqrt(k(i, i) * k(j, j)));
    return NpdMatrix::from_symmetric(std::move(a));
}

/// H_alpha(A) = log2(sum_i lambda_i^alpha) / (1 - alpha), in [0, log2 N].
inline double renyi_entropy_matrix(const NpdMatrix& a, double alpha) {
    if (!(alpha > 0.0) || alpha == 1.0) throw ConfigError("renyi entropy: alpha must be > 0 and != 1");
    double s = 0.0;
    for (long i = 0; i < a.eigenvalues.size(); ++i)
        if (a.eigenvalues(i) > 0.0) s += std::pow(a.eigenvalues(i), alpha);
    if (!(s > 0.0)) throw DomainError("renyi entropy: vanishing spectrum");
    const double h = std::log2(s) / (1.0 - alpha);
    return std::clamp(h, 0.0, std::log2(static_cast<double>(a.size())));
}

/// H_alpha(A, B) = H_alpha(A o B / tr(A o B)), Hadamard product joint.
inline double joint_renyi_entropy(const NpdMatrix& a, const NpdMatrix& b, double alpha) {
    if (a.size() != b.size()) throw ShapeError("joint entropy: size mismatch");
    Mat c = a.entries.cwiseProduct(b.entries);
    const double tr = c.trace();
    if (!(tr > 0.0)) throw DomainError("joint entropy: tr(A o B) vanishes");
    return renyi_entropy_matrix(NpdMatrix::from_symmetric(std::move(c)), alpha);
}

enum class Kernel { Gaussian };

struct MIConfig {
    double alpha = 1.01;     // Renyi order; alpha -> 1 recovers Shannon
    Kernel kernel = Kernel::Gaussian;
    double h_override = 0.0; // 0 -> per-set silverman_h
    int probe_size = 512;
    double clamp_floor = 0.0;       // estimator-noise floor for MI values
    double dpi_tolerance_bits = 0.1;

    void check() const {
        if (!(alpha > 0.0) || alpha == 1.0) throw ConfigError("MIConfig: alpha must be > 0 and != 1");
        if (probe_size < 8) throw ConfigError("MIConfig: probe_size must be >= 8");
    }
};

/// I_alpha(X;Y) = H_alpha(A) + H_alpha(B) - H_alpha(A,B) from the
/// matrix-based estimator with per-set Silverman bandwidths. A bitwise
/// copy of X carries no new coordinates: the joint Gram is the marginal
/// one, so the identity I(X;X) = H_alpha(A_X) is returned exactly.
inline double renyi_mi(const Mat& x, const Mat& y, const MIConfig& cfg = {}) {
    cfg.check();
    if (x.rows() != y.rows()) throw ShapeError("renyi_mi: sample count mismatch");
    const double hx = cfg.h_override > 0 ? cfg.h_override : silverman_h(x);
    const NpdMatrix a = gram_npd(x, silverman_sigma(x.rows(), static_cast<int>(x.cols()), std::max(hx, 1e-300)));
    if (x.cols() == y.cols() && x == y)
        return std::max(renyi_entropy_matrix(a, cfg.alpha), cfg.clamp_floor);
    const double hy = cfg.h_override > 0 ? cfg.h_override : silverman_h(y);
    const NpdMatrix b = gram_npd(y, silverman_sigma(y.rows(), static_cast<int>(y.cols()), std::max(hy, 1e-300)));
    const double mi = renyi_entropy_matrix(a, cfg.alpha) + renyi_entropy_matrix(b, cfg.alpha) -
                      joint_renyi_entropy(a, b, cfg.alpha);
    return std::max(mi, cfg.clamp_floor);
}

// ---------------------------------------------------------------------------
// Information planes over training snapshots.
// ---------------------------------------------------------------------------

struct LayerMI {
    int layer = 0;       // 1-based hidden-layer index, input side first
    double i_input = 0;  // I(Y ; T_layer)
    double i_output = 0; // I(T_layer ; Ytilde)
};

struct InfoPlaneRecord {
    int epoch = 0;
    std::vector<LayerMI> encoder;  // T^E_1 .. T^E_Nh
    std::vector<LayerMI> decoder;  // forward order: index 0 is nearest the bottleneck
    LayerMI bottleneck;            // T = Yhat
    std::vector<double> ip2;       // I(T^E_l ; T^D_l), paper pairing, l = 1..Nh
    double i_y_ytilde = 0;         // upper bound of DPI chain 2
    double h_yhat = 0;             // lower bound of DPI chain 2 (= I(Yhat;Yhat))
};

struct SnapshotRef {
    int epoch = 0;
    const AENodeModel* model = nullptr;
};

namespace detail {

struct ProbeActivations {
    std::vector<Mat> enc_hidden;
    Mat yhat;
    std::vector<Mat> dec_hidden;
    Mat ytilde;
};

inline ProbeActivations run_probe(const AENodeModel& m, const Mat& probe) {
    ForwardCache enc, dec;
    ProbeActivations acts;
    acts.yhat = mlp_forward(m.encoder, probe, &enc);
    acts.ytilde = mlp_forward(m.decoder, acts.yhat, &dec);
    for (int l = 0; l + 1 < static_cast<int>(enc.post.size()); ++l) acts.enc_hidden.push_back(enc.post[l]);
    for (int l = 0; l + 1 < static_cast<int>(dec.post.size()); ++l) acts.dec_hidden.push_back(dec.post[l]);
    return acts;
}

inline double calibrated_sigma(const Mat& set, double h_override) {
    const double h = h_override > 0 ? h_override : silverman_h(set);
    return silverman_sigma(set.rows(), static_cast<int>(set.cols()), std::max(h, 1e-300));
}

}  // namespace detail

/// Per-epoch, per-layer mutual-information coordinates for IP-1 and
/// IP-2. Kernel bandwidths are calibrated once on the last (most
/// trained) snapshot and shared across epochs, so curves from different
/// epochs are comparable and a freshly initialized network with small
/// activations reads as low-information.
inline std::vector<InfoPlaneRecord> compute_info_planes(const std::vector<SnapshotRef>& snapshots,
                                                        const Mat& probe_y, const MIConfig& cfg = {}) {
    cfg.check();
    if (snapshots.empty()) throw ConfigError("compute_info_planes: no snapshots");
    if (probe_y.rows() < 8) throw ConfigError("compute_info_planes: probe must have >= 8 samples");
    for (const auto& s : snapshots)
        if (!s.model || s.model->n_physical() != probe_y.cols())
            throw ShapeError("compute_info_planes: probe width mismatch");

    const auto ref_acts = detail::run_probe(*snapshots.back().model, probe_y);
    const int n_hidden = static_cast<int>(ref_acts.enc_hidden.size());
    const double sigma_y = detail::calibrated_sigma(probe_y, cfg.h_override);
    const double sigma_yhat = detail::calibrated_sigma(ref_acts.yhat, cfg.h_override);
    const double sigma_ytilde = detail::calibrated_sigma(ref_acts.ytilde, cfg.h_override);
    std::vector<double> sigma_enc(n_hidden), sigma_dec(ref_acts.dec_hidden.size());
    for (int l = 0; l < n_hidden; ++l)
        sigma_enc[l] = detail::calibrated_sigma(ref_acts.enc_hidden[l], cfg.h_override);
    for (std::size_t l = 0; l < ref_acts.dec_hidden.size(); ++l)
        sigma_dec[l] = detail::calibrated_sigma(ref_acts.dec_hidden[l], cfg.h_override);

    const NpdMatrix npd_y = gram_npd(probe_y, sigma_y);
    const double h_y = renyi_entropy_matrix(npd_y, cfg.alpha);

    std::vector<InfoPlaneRecord> records;
    records.reserve(snapshots.size());
    for (const auto& snap : snapshots) {
        const auto acts = detail::run_probe(*snap.model, probe_y);
        if (static_cast<int>(acts.enc_hidden.size()) != n_hidden)
            throw ShapeError("compute_info_planes: snapshot depth mismatch");

        const NpdMatrix npd_yhat = gram_npd(acts.yhat, sigma_yhat);
        const NpdMatrix npd_ytilde = gram_npd(acts.ytilde, sigma_ytilde);
        std::vector<NpdMatrix> npd_enc, npd_dec;
        for (int l = 0; l < n_hidden; ++l) npd_enc.push_back(gram_npd(acts.enc_hidden[l], sigma_enc[l]));
        for (std::size_t l = 0; l < acts.dec_hidden.size(); ++l)
            npd_dec.push_back(gram_npd(acts.dec_hidden[l], sigma_dec[l]));

        const double h_yhat = renyi_entropy_matrix(npd_yhat, cfg.alpha);
        const double h_ytilde = renyi_entropy_matrix(npd_ytilde, cfg.alpha);
        auto mi = [&](const NpdMatrix& a, double ha, const NpdMatrix& b, double hb) {
            return std::max(ha + hb - joint_renyi_entropy(a, b, cfg.alpha), cfg.clamp_floor);
        };

        InfoPlaneRecord rec;
        rec.epoch = snap.epoch;
        for (int l = 0; l < n_hidden; ++l) {
            const double ht = renyi_entropy_matrix(npd_enc[l], cfg.alpha);
            rec.encoder.push_back(
                {l + 1, mi(npd_y, h_y, npd_enc[l], ht), mi(npd_enc[l], ht, npd_ytilde, h_ytilde)});
        }
        for (std::size_t l = 0; l < npd_dec.size(); ++l) {
            const double ht = renyi_entropy_matrix(npd_dec[l], cfg.alpha);
            rec.decoder.push_back({static_cast<int>(l) + 1, mi(npd_y, h_y, npd_dec[l], ht),
                                   mi(npd_dec[l], ht, npd_ytilde, h_ytilde)});
        }
        rec.bottleneck = {0, mi(npd_y, h_y, npd_yhat, h_yhat), mi(npd_yhat, h_yhat, npd_ytilde, h_ytilde)};
        // IP-2 pairs T^E_l with T^D_l, where decoder layers count from
        // the output side; the chain ends at I(Yhat;Yhat) = H(Yhat).
        for (int l = 0; l < n_hidden; ++l) {
            const int dec_idx = n_hidden - 1 - l;
            const double he = renyi_entropy_matrix(npd_enc[l], cfg.alpha);
            const double hd = renyi_entropy_matrix(npd_dec[dec_idx], cfg.alpha);
            rec.ip2.push_back(mi(npd_enc[l], he, npd_dec[dec_idx], hd));
        }
        rec.i_y_ytilde = mi(npd_y, h_y, npd_ytilde, h_ytilde);
        rec.h_yhat = std::max(h_yhat, cfg.clamp_floor);
        records.push_back(std::move(rec));
    }
    return records;
}

/// IP-1 view (encoder/decoder/bottleneck coordinates per epoch).
inline std::vector<InfoPlaneRecord> info_plane_1(const std::vector<SnapshotRef>& snapshots,
                                                 const Mat& probe_y, const MIConfig& cfg = {}) {
    return compute_info_planes(snapshots, probe_y, cfg);
}

struct InfoPlane2Row {
    int epoch = 0;
    std::vector<double> pair_mi;  // depth-ordered I(T^E_l ; T^D_l)
    double bound_high = 0;        // I(Y;Ytilde)
    double bound_low = 0;         // H(Yhat)
};

/// IP-2 view: symmetric layer-pair MI per epoch with its two bounds.
inline std::vector<InfoPlane2Row> info_plane_2(const std::vector<SnapshotRef>& snapshots, const Mat& probe_y,
                                               const MIConfig& cfg = {}) {
    std::vector<InfoPlane2Row> rows;
    for (const auto& rec : compute_info_planes(snapshots, probe_y, cfg))
        rows.push_back({rec.epoch, rec.ip2, rec.i_y_ytilde, rec.h_yhat});
    return rows;
}

// ---------------------------------------------------------------------------
// Data-processing inequalities and learning phases.
// ---------------------------------------------------------------------------

struct DpiViolation {
    std::string chain;  // "1a", "1b", "2"
    int index = 0;      // position of the broken adjacent pair
    double gap_bits = 0;
};

/// Check chains 1a (encoder, input MI), 1b (decoder, output MI) and 2
/// (symmetric pairs). A violation is an adjacent pair whose monotone
/// decay is broken by more than tolerance_bits.
inline std::vector<DpiViolation> check_dpi(const InfoPlaneRecord& rec, double tolerance_bits) {
    std::vector<DpiViolation> out;
    auto scan = [&](const std::string& name, const std::vector<double>& seq) {
        for (std::size_t i = 0; i + 1 < seq.size(); ++i)
            if (seq[i + 1] > seq[i] + tolerance_bits)
                out.push_back({name, static_cast<int>(i), seq[i + 1] - seq[i]});
    };
    std::vector<double> chain_1a;
    for (const auto& l : rec.encoder) chain_1a.push_back(l.i_input);
    chain_1a.push_back(rec.bottleneck.i_input);
    scan("1a", chain_1a);

    std::vector<double> chain_1b;  // T^D_1 is nearest the output
    for (auto it = rec.decoder.rbegin(); it != rec.decoder.rend(); ++it) chain_1b.push_back(it->i_output);
    chain_1b.push_back(rec.bottleneck.i_output);
    scan("1b", chain_1b);

    std::vector<double> chain_2{rec.i_y_ytilde};
    chain_2.insert(chain_2.end(), rec.ip2.begin(), rec.ip2.end());
    chain_2.push_back(rec.h_yhat);
    scan("2", chain_2);
    return out;
}

struct PhaseResult {
    int fit_end_epoch = -1;            // index into the supplied curve
    bool compression_detected = false;
    bool indeterminate = false;        // too few epochs
};

/// Fitting phase ends when I(T;Ytilde) first reaches 90% of its maximum
/// over the curve; compression is a subsequent joint decrease of both
/// coordinates (after light smoothing) by more than tolerance_bits.
inline PhaseResult detect_phases(const std::vector<double>& i_input, const std::vector<double>& i_output,
                                 double tolerance_bits = 0.05) {
    PhaseResult res;
    if (i_input.size() != i_output.size()) throw ShapeError("detect_phases: curve length mismatch");
    if (i_input.size() < 5) {
        res.indeterminate = true;
        return res;
    }
    const double peak = *std::max_element(i_output.begin(), i_output.end());
    std::size_t fit_end = 0;
    while (fit_end < i_output.size() && i_output[fit_end] < 0.9 * peak) ++fit_end;
    res.fit_end_epoch = static_cast<int>(fit_end);

    auto smooth = [](const std::vector<double>& v) {
        std::vector<double> s(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            const std::size_t lo = i > 0 ? i - 1 : 0;
            const std::size_t hi = i + 1 < v.size() ? i + 1 : v.size() - 1;
            s[i] = (v[lo] + v[i] + v[hi]) / 3.0;
        }
        return s;
    };
    const auto sin_ = smooth(i_input);
    const auto sout = smooth(i_output);
    for (std::size_t k = fit_end; k < sin_.size() && !res.compression_detected; ++k)
        for (std::size_t j = k + 1; j < sin_.size(); ++j)
            if (sin_[k] - sin_[j] > tolerance_bits && sout[k] - sout[j] > tolerance_bits) {
                res.compression_detected = true;
                break;
            }
    return res;
}

// ---------------------------------------------------------------------------
// Kernel density estimation and the bimodality gap.
// ---------------------------------------------------------------------------

/// Classical 1-D Silverman bandwidth 1.06 * std * n^(-1/5).
inline double silverman_bandwidth_1d(const std::vector<double>& samples) {
    if (samples.size() < 2) throw DomainError("silverman_bandwidth_1d: need >= 2 samples");
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / samples.size();
    double var = 0.0;
    for (double x : samples) var += (x - mean) * (x - mean);
    var /= (samples.size() - 1);
    return silverman_sigma(static_cast<long>(samples.size()), 1, 1.06 * std::sqrt(var));
}

/// Gaussian-kernel density estimate on a sorted grid.
inline Vec kde_pdf(const std::vector<double>& samples, double bandwidth, const std::vector<double>& grid) {
    if (samples.empty()) throw DomainError("kde_pdf: empty sample");
    if (bandwidth <= 0.0) throw ConfigError("kde_pdf: bandwidth must be positive");
    if (!std::is_sorted(grid.begin(), grid.end())) throw ConfigError("kde_pdf: grid must be sorted");
    Vec density(grid.size());
    const double norm = 1.0 / (samples.size() * bandwidth * std::sqrt(2.0 * M_PI));
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double acc = 0.0;
        for (double x : samples) {
            const double u = (grid[g] - x) / bandwidth;
            acc += std::exp(-0.5 * u * u);
        }
        density(g) = norm * acc;
    }
    return density;
}

/// Grid spanning the samples plus margin * bandwidth on both ends.
inline std::vector<double> kde_grid(const std::vector<double>& samples, double bandwidth, int points = 512,
                                    double margin = 4.0) {
    const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
    const double lo = *lo_it - margin * bandwidth;
    const double hi = *hi_it + margin * bandwidth;
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i) grid[i] = lo + (hi - lo) * i / (points - 1);
    return grid;
}

/// 1 - valley/min(peak heights) between the two tallest modes of a
/// density curve; 0 when fewer than two modes exist. Near 1 means mass
/// concentrates in two peaks separated by a low-probability region.
inline double bimodality_gap(const Vec& density) {
    std::vector<long> maxima;
    for (long i = 1; i + 1 < density.size(); ++i)
        if (density(i) > density(i - 1) && density(i) >= density(i + 1)) maxima.push_back(i);
    if (maxima.size() < 2) return 0.0;
    std::sort(maxima.begin(), maxima.end(), [&](long a, long b) { return density(a) > density(b); });
    long m1 = maxima[0], m2 = maxima[1];
    if (m1 > m2) std::swap(m1, m2);
    double valley = density(m1);
    for (long i = m1; i <= m2; ++i) valley = std::min(valley, density(i));
    const double lower_peak = std::min(density(m1), density(m2));
    if (lower_peak <= 0.0) return 0.0;
    return std::clamp(1.0 - valley / lower_peak, 0.0, 1.0);
}

/// Fixed random subset of the test split, reused across epochs so the
/// information-plane curves are comparable. Rows are normalized states.
inline Mat make_probe(const Dataset& ds, int probe_size, std::uint64_t seed) {
    if (ds.test_idx.empty()) throw ConfigError("make_probe: dataset has no test split");
    std::vector<std::size_t> order = ds.test_idx;
    Rng rng = Rng(seed).fork(7);
    rng.shuffle(order);
    const int n = std::min<int>(probe_size, static_cast<int>(order.size()));
    if (n < 8) throw ConfigError("make_probe: fewer than 8 probe samples available");
    Mat probe(n, ds.dim());
    for (int i = 0; i < n; ++i) probe.row(i) = ds.input_normalized(order[i]).transpose();
    return probe;
}

}  // namespace aenode
