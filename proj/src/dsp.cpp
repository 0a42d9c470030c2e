#include "affcorr/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>

#include "affcorr/errors.hpp"

namespace affcorr {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Twiddle table for one FFT size: w^k = exp(-2*pi*i*k/n), k in [0, n/2).
struct FftPlan {
    std::size_t n = 0;
    std::vector<double> cos_tab;
    std::vector<double> sin_tab;

    explicit FftPlan(std::size_t size) : n(size), cos_tab(size / 2), sin_tab(size / 2) {
        for (std::size_t k = 0; k < size / 2; ++k) {
            const double ang = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(size);
            cos_tab[k] = std::cos(ang);
            sin_tab[k] = std::sin(ang);
        }
    }
};

// In-place iterative radix-2 FFT; re/im must have plan.n elements.
void fft_radix2(const FftPlan &plan, std::vector<double> &re, std::vector<double> &im) {
    const std::size_t n = plan.n;
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) {
            j ^= bit;
        }
        j |= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        const std::size_t stride = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < half; ++k) {
                const double wr = plan.cos_tab[k * stride];
                const double wi = plan.sin_tab[k * stride];
                const std::size_t a = i + k;
                const std::size_t b = a + half;
                const double tr = re[b] * wr - im[b] * wi;
                const double ti = re[b] * wi + im[b] * wr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
            }
        }
    }
}

// O(n^2) DFT for frame lengths that are not powers of two.
void dft_naive(std::vector<double> &re, std::vector<double> &im) {
    const std::size_t n = re.size();
    std::vector<double> out_re(n, 0.0), out_im(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double sr = 0.0, si = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double ang = -2.0 * kPi * static_cast<double>(k) * static_cast<double>(t) /
                               static_cast<double>(n);
            const double c = std::cos(ang), s = std::sin(ang);
            sr += re[t] * c - im[t] * s;
            si += re[t] * s + im[t] * c;
        }
        out_re[k] = sr;
        out_im[k] = si;
    }
    re = std::move(out_re);
    im = std::move(out_im);
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Orthonormal DCT-II matrix, n_coeffs x n.
std::vector<double> dct_matrix(std::size_t n_coeffs, std::size_t n) {
    std::vector<double> d(n_coeffs * n);
    const double s0 = std::sqrt(1.0 / static_cast<double>(n));
    const double sk = std::sqrt(2.0 / static_cast<double>(n));
    for (std::size_t k = 0; k < n_coeffs; ++k) {
        const double scale = (k == 0) ? s0 : sk;
        for (std::size_t j = 0; j < n; ++j) {
            d[k * n + j] =
                scale * std::cos(kPi * (static_cast<double>(j) + 0.5) * static_cast<double>(k) /
                                 static_cast<double>(n));
        }
    }
    return d;
}

} // namespace

void SegmentSpec::validate() const {
    if (window_hop_s <= 0.0) {
        throw InvalidInput("segment spec: window hop must be positive");
    }
    if (window_len_s <= 0.0 || window_len_s > segment_len_s) {
        throw InvalidInput("segment spec: window length must be in (0, segment length]");
    }
    const double hops = (segment_len_s - window_len_s) / window_hop_s;
    if (std::abs(hops - std::round(hops)) > 1e-9) {
        throw InvalidInput("segment spec: windows must tile the segment exactly");
    }
}

Spectrogram stft(const AudioClip &clip, std::size_t frame_len, std::size_t hop) {
    if (frame_len < 2) {
        throw InvalidInput("stft: frame length must be at least 2");
    }
    if (hop == 0) {
        throw InvalidInput("stft: hop must be positive");
    }
    if (clip.samples.size() < frame_len) {
        throw InvalidInput("stft: clip shorter than one frame (" +
                           std::to_string(clip.samples.size()) + " < " +
                           std::to_string(frame_len) + " samples)");
    }

    Spectrogram spec;
    spec.frame_len = frame_len;
    spec.hop = hop;
    spec.sample_rate = clip.sample_rate;
    spec.frames = 1 + (clip.samples.size() - frame_len) / hop;
    spec.bins = frame_len / 2 + 1;
    spec.mag.resize(spec.frames * spec.bins);

    std::vector<double> window(frame_len);
    for (std::size_t i = 0; i < frame_len; ++i) {
        window[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) /
                                          static_cast<double>(frame_len - 1)));
    }

    const bool pow2 = is_pow2(frame_len);
    const FftPlan plan(pow2 ? frame_len : 2);
    std::vector<double> re(frame_len), im(frame_len);
    for (std::size_t f = 0; f < spec.frames; ++f) {
        const double *src = clip.samples.data() + f * hop;
        for (std::size_t i = 0; i < frame_len; ++i) {
            re[i] = src[i] * window[i];
            im[i] = 0.0;
        }
        if (pow2) {
            fft_radix2(plan, re, im);
        } else {
            dft_naive(re, im);
        }
        double *out = spec.mag.data() + f * spec.bins;
        for (std::size_t k = 0; k < spec.bins; ++k) {
            out[k] = std::sqrt(re[k] * re[k] + im[k] * im[k]);
        }
    }
    return spec;
}

void MelFilterbank::apply_power(std::span<const double> frame_mag, std::span<double> out) const {
    if (frame_mag.size() != bins || out.size() != n_mels) {
        throw ShapeError("mel filterbank: frame has " + std::to_string(frame_mag.size()) +
                         " bins, expected " + std::to_string(bins));
    }
    std::vector<double> power(bins);
    for (std::size_t k = 0; k < bins; ++k) {
        power[k] = frame_mag[k] * frame_mag[k];
    }
    for (std::size_t m = 0; m < n_mels; ++m) {
        const double *w = weights.data() + m * bins + start[m];
        const double *p = power.data() + start[m];
        double acc = 0.0;
        for (std::size_t k = 0; k < length[m]; ++k) {
            acc += w[k] * p[k];
        }
        out[m] = acc;
    }
}

MelFilterbank mel_filterbank(std::size_t n_mels, std::size_t frame_len, int sample_rate) {
    if (n_mels < 1) {
        throw InvalidInput("mel filterbank: need at least one band");
    }
    if (frame_len < 2 || sample_rate <= 0) {
        throw InvalidInput("mel filterbank: frame length and sample rate must be positive");
    }
    const std::size_t bins = frame_len / 2 + 1;
    if (n_mels > bins) {
        throw InvalidInput("mel filterbank: " + std::to_string(n_mels) + " bands exceed " +
                           std::to_string(bins) + " spectrum bins");
    }

    const double mel_max = hz_to_mel(sample_rate / 2.0);
    std::vector<double> edges_hz(n_mels + 2);
    for (std::size_t i = 0; i < edges_hz.size(); ++i) {
        edges_hz[i] = mel_to_hz(mel_max * static_cast<double>(i) /
                                static_cast<double>(n_mels + 1));
    }

    MelFilterbank fb;
    fb.n_mels = n_mels;
    fb.bins = bins;
    fb.weights.assign(n_mels * bins, 0.0);
    fb.start.resize(n_mels);
    fb.length.resize(n_mels);
    fb.center_hz.resize(n_mels);

    const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(frame_len);
    for (std::size_t m = 0; m < n_mels; ++m) {
        const double lo = edges_hz[m], center = edges_hz[m + 1], hi = edges_hz[m + 2];
        fb.center_hz[m] = center;
        std::size_t first = bins, last = 0;
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * bin_hz;
            double w = 0.0;
            if (f >= lo && f <= center && center > lo) {
                w = (f - lo) / (center - lo);
            } else if (f > center && f <= hi && hi > center) {
                w = (hi - f) / (hi - center);
            }
            if (w > 0.0) {
                fb.weights[m * bins + k] = w;
                first = std::min(first, k);
                last = k;
            }
        }
        if (first == bins) {
            throw InvalidInput("mel filterbank: band " + std::to_string(m) +
                               " covers no spectrum bin; frame too short for " +
                               std::to_string(n_mels) + " bands");
        }
        fb.start[m] = first;
        fb.length[m] = last - first + 1;
    }
    return fb;
}

std::vector<double> mfcc(const Spectrogram &spec, std::size_t n_mels, std::size_t n_coeffs) {
    if (n_coeffs > n_mels) {
        throw InvalidInput("mfcc: cannot keep more coefficients than mel bands");
    }
    const MelFilterbank fb = mel_filterbank(n_mels, spec.frame_len, spec.sample_rate);
    const std::vector<double> dct = dct_matrix(n_coeffs, n_mels);

    std::vector<double> acc(n_coeffs, 0.0);
    std::vector<double> mel(n_mels), logmel(n_mels);
    for (std::size_t f = 0; f < spec.frames; ++f) {
        fb.apply_power(spec.frame(f), mel);
        for (std::size_t m = 0; m < n_mels; ++m) {
            logmel[m] = std::log(std::max(mel[m], kLogFloor));
        }
        for (std::size_t k = 0; k < n_coeffs; ++k) {
            const double *row = dct.data() + k * n_mels;
            double s = 0.0;
            for (std::size_t m = 0; m < n_mels; ++m) {
                s += row[m] * logmel[m];
            }
            acc[k] += s;
        }
    }
    for (double &v : acc) {
        v /= static_cast<double>(spec.frames);
    }
    return acc;
}

std::vector<double> chroma_frames(const Spectrogram &spec) {
    // Pitch class per bin; -1 below the 20 Hz cutoff. Class 0 = C.
    constexpr double kC4Hz = 261.6256;
    std::vector<int> pitch_class(spec.bins, -1);
    for (std::size_t k = 0; k < spec.bins; ++k) {
        const double f = spec.bin_hz(k);
        if (f > 20.0) {
            const long step = std::lround(12.0 * std::log2(f / kC4Hz));
            pitch_class[k] = static_cast<int>(((step % 12) + 12) % 12);
        }
    }

    std::vector<double> out(spec.frames * 12, 0.0);
    for (std::size_t f = 0; f < spec.frames; ++f) {
        const std::span<const double> mag = spec.frame(f);
        double *row = out.data() + f * 12;
        for (std::size_t k = 0; k < spec.bins; ++k) {
            if (pitch_class[k] >= 0) {
                row[pitch_class[k]] += mag[k];
            }
        }
    }
    return out;
}

std::vector<double> chroma(const Spectrogram &spec) {
    const std::vector<double> frames = chroma_frames(spec);
    std::vector<double> acc(12, 0.0);
    for (std::size_t f = 0; f < spec.frames; ++f) {
        const double *row = frames.data() + f * 12;
        const double peak = *std::max_element(row, row + 12);
        if (peak > 0.0) {
            for (std::size_t p = 0; p < 12; ++p) {
                acc[p] += row[p] / peak;
            }
        }
    }
    for (double &v : acc) {
        v /= static_cast<double>(spec.frames);
    }
    return acc;
}

std::vector<double> spectral_contrast(const Spectrogram &spec) {
    constexpr std::size_t kBands = 7;
    constexpr double kEdges[kBands + 1] = {0.0,    200.0,  400.0,  800.0,
                                           1600.0, 3200.0, 6400.0, 0.0};
    const double nyquist = spec.sample_rate / 2.0;

    // Bins are frequency-ordered, so each band is a contiguous index range.
    std::size_t cut[kBands + 1];
    cut[0] = 0;
    cut[kBands] = spec.bins;
    for (std::size_t b = 1; b < kBands; ++b) {
        std::size_t k = cut[b - 1];
        while (k < spec.bins && spec.bin_hz(k) < kEdges[b]) {
            ++k;
        }
        cut[b] = k;
    }
    for (std::size_t b = 0; b < kBands; ++b) {
        if (cut[b + 1] <= cut[b]) {
            throw InvalidInput("spectral contrast: band " + std::to_string(b) +
                               " covers no spectrum bin at " +
                               std::to_string(spec.sample_rate) + " Hz");
        }
    }
    if (nyquist < kEdges[kBands - 1]) {
        throw InvalidInput("spectral contrast: sample rate too low for the 6400 Hz band");
    }

    std::vector<double> acc(kBands, 0.0);
    std::vector<double> scratch;
    for (std::size_t f = 0; f < spec.frames; ++f) {
        const std::span<const double> mag = spec.frame(f);
        for (std::size_t b = 0; b < kBands; ++b) {
            const std::size_t n = cut[b + 1] - cut[b];
            const std::size_t q = std::max<std::size_t>(1, static_cast<std::size_t>(0.02 * n));
            scratch.assign(mag.begin() + cut[b], mag.begin() + cut[b + 1]);

            std::nth_element(scratch.begin(), scratch.begin() + (q - 1), scratch.end());
            double valley = 0.0;
            for (std::size_t i = 0; i < q; ++i) {
                valley += scratch[i];
            }
            std::nth_element(scratch.begin(), scratch.begin() + (q - 1), scratch.end(),
                             std::greater<>());
            double peak = 0.0;
            for (std::size_t i = 0; i < q; ++i) {
                peak += scratch[i];
            }
            acc[b] += std::log(peak / static_cast<double>(q) + kLogFloor) -
                      std::log(valley / static_cast<double>(q) + kLogFloor);
        }
    }
    for (double &v : acc) {
        v /= static_cast<double>(spec.frames);
    }
    return acc;
}

std::array<double, 72> tonnetz_projection() {
    std::array<double, 72> phi{};
    constexpr double r1 = 1.0, r2 = 1.0, r3 = 0.5;
    for (std::size_t l = 0; l < 12; ++l) {
        const double dl = static_cast<double>(l);
        phi[0 * 12 + l] = r1 * std::sin(dl * 7.0 * kPi / 6.0);
        phi[1 * 12 + l] = r1 * std::cos(dl * 7.0 * kPi / 6.0);
        phi[2 * 12 + l] = r2 * std::sin(dl * 3.0 * kPi / 2.0);
        phi[3 * 12 + l] = r2 * std::cos(dl * 3.0 * kPi / 2.0);
        phi[4 * 12 + l] = r3 * std::sin(dl * 2.0 * kPi / 3.0);
        phi[5 * 12 + l] = r3 * std::cos(dl * 2.0 * kPi / 3.0);
    }
    return phi;
}

std::vector<double> tonal_centroid(const Spectrogram &spec) {
    const std::vector<double> frames = chroma_frames(spec);
    const std::array<double, 72> phi = tonnetz_projection();

    std::vector<double> acc(6, 0.0);
    for (std::size_t f = 0; f < spec.frames; ++f) {
        const double *c = frames.data() + f * 12;
        double l1 = 0.0;
        for (std::size_t p = 0; p < 12; ++p) {
            l1 += std::abs(c[p]);
        }
        const double denom = std::max(l1, kLogFloor);
        for (std::size_t i = 0; i < 6; ++i) {
            double s = 0.0;
            for (std::size_t p = 0; p < 12; ++p) {
                s += phi[i * 12 + p] * c[p];
            }
            acc[i] += s / denom;
        }
    }
    for (double &v : acc) {
        v /= static_cast<double>(spec.frames);
    }
    return acc;
}

std::vector<double> mel_features(const Spectrogram &spec) {
    const MelFilterbank fb = mel_filterbank(kMelBands, spec.frame_len, spec.sample_rate);
    std::vector<double> acc(kMelBands, 0.0);
    std::vector<double> mel(kMelBands);
    for (std::size_t f = 0; f < spec.frames; ++f) {
        fb.apply_power(spec.frame(f), mel);
        for (std::size_t m = 0; m < kMelBands; ++m) {
            acc[m] += std::log(mel[m] + kLogFloor);
        }
    }
    for (double &v : acc) {
        v /= static_cast<double>(spec.frames);
    }
    return acc;
}

MusicFeatureVector extract_window_features(const AudioClip &window, const SegmentSpec &spec) {
    spec.validate();
    if (window.sample_rate <= 0) {
        throw InvalidInput("window features: sample rate must be positive");
    }
    const auto expected =
        static_cast<std::size_t>(std::llround(spec.window_len_s * window.sample_rate));
    if (window.samples.size() != expected) {
        throw InvalidInput("window features: expected " + std::to_string(expected) +
                           " samples, got " + std::to_string(window.samples.size()));
    }

    const Spectrogram s = stft(window);
    const std::vector<double> c_mfcc = mfcc(s);
    const std::vector<double> c_chroma = chroma(s);
    const std::vector<double> c_contrast = spectral_contrast(s);
    const std::vector<double> c_tonnetz = tonal_centroid(s);
    const std::vector<double> c_mel = mel_features(s);

    MusicFeatureVector out;
    std::copy(c_mfcc.begin(), c_mfcc.end(), out.values.begin() + MusicFeatureVector::kMfccOffset);
    std::copy(c_chroma.begin(), c_chroma.end(),
              out.values.begin() + MusicFeatureVector::kChromaOffset);
    std::copy(c_contrast.begin(), c_contrast.end(),
              out.values.begin() + MusicFeatureVector::kContrastOffset);
    std::copy(c_tonnetz.begin(), c_tonnetz.end(),
              out.values.begin() + MusicFeatureVector::kTonnetzOffset);
    std::copy(c_mel.begin(), c_mel.end(), out.values.begin() + MusicFeatureVector::kMelOffset);
    out.validate();
    return out;
}

std::vector<MusicFeatureVector> extract_segment_windows(const AudioClip &segment,
                                                        const SegmentSpec &spec) {
    spec.validate();
    if (segment.sample_rate <= 0) {
        throw InvalidInput("segment features: sample rate must be positive");
    }
    const auto expected =
        static_cast<std::size_t>(std::llround(spec.segment_len_s * segment.sample_rate));
    if (segment.samples.size() != expected) {
        throw InvalidInput("segment features: expected " + std::to_string(expected) +
                           " samples, got " + std::to_string(segment.samples.size()));
    }

    const auto wlen = static_cast<std::size_t>(std::llround(spec.window_len_s * segment.sample_rate));
    const auto whop = static_cast<std::size_t>(std::llround(spec.window_hop_s * segment.sample_rate));
    const std::size_t count = spec.windows_per_segment();

    std::vector<MusicFeatureVector> out;
    out.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        AudioClip window;
        window.sample_rate = segment.sample_rate;
        window.id = segment.id;
        const auto begin = segment.samples.begin() + static_cast<std::ptrdiff_t>(w * whop);
        window.samples.assign(begin, begin + static_cast<std::ptrdiff_t>(wlen));
        out.push_back(extract_window_features(window, spec));
    }
    return out;
}

MusicFeatureVector extract_segment_features(const AudioClip &segment, const SegmentSpec &spec) {
    const std::vector<MusicFeatureVector> windows = extract_segment_windows(segment, spec);
    MusicFeatureVector out;
    for (const MusicFeatureVector &w : windows) {
        for (std::size_t i = 0; i < MusicFeatureVector::kDim; ++i) {
            out.values[i] += w.values[i];
        }
    }
    for (double &v : out.values) {
        v /= static_cast<double>(windows.size());
    }
    return out;
}

} // namespace affcorr
