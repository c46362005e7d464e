#include "specmix/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "specmix/common.hpp"

namespace specmix::spectra {

void CohortConfig::validate() const {
    if (n_patients < 2) throw ConfigError("cohort: n_patients must be >= 2, got " + std::to_string(n_patients));
    if (voxels_min < 1) throw ConfigError("cohort: voxel range lower bound must be >= 1, got " + std::to_string(voxels_min));
    if (voxels_max < voxels_min) throw ConfigError("cohort: voxel range is empty");
    if (tumor_fraction < 0.0 || tumor_fraction > 1.0) throw ConfigError("cohort: tumor_fraction must be in [0,1]");
    if (baseline_distortion_amplitude < 0.0) throw ConfigError("cohort: baseline_distortion_amplitude must be >= 0");
    if (noise_sigma < 0.0) throw ConfigError("cohort: noise_sigma must be >= 0");
    if (label_noise.rate < 0.0 || label_noise.rate > 1.0) throw ConfigError("cohort: label noise rate must be in [0,1]");
    for (const auto& [cls, profile] : class_profiles) {
        if (cls != 0 && cls != 1) throw ConfigError("cohort: class keys must be 0 or 1");
        if (profile.empty()) throw ConfigError("cohort: class " + std::to_string(cls) + " has an empty profile");
        for (const auto& p : profile) {
            if (p.center_index < 0 || p.center_index >= kSpectrumSamples)
                throw ConfigError("peak '" + p.name + "': center_index " + std::to_string(p.center_index) +
                                  " out of [0, " + std::to_string(kSpectrumSamples) + ")");
            if (!(p.width > 0.0)) throw ConfigError("peak '" + p.name + "': width must be > 0");
            if (p.amp_hi < p.amp_lo) throw ConfigError("peak '" + p.name + "': amplitude range is empty");
        }
    }
    if (class_profiles.count(0) == 0 || class_profiles.count(1) == 0)
        throw ConfigError("cohort: profiles for both classes (0 and 1) are required");
}

std::vector<std::string> Dataset::patient_ids() const {
    std::vector<std::string> ids;
    std::set<std::string> seen;
    for (const auto& s : spectra)
        if (seen.insert(s.patient_id).second) ids.push_back(s.patient_id);
    return ids;
}

std::map<int, size_t> Dataset::label_counts() const {
    std::map<int, size_t> counts;
    for (const auto& s : spectra) ++counts[s.label];
    return counts;
}

Dataset Dataset::subset(const std::vector<size_t>& indices) const {
    Dataset out;
    out.name = name;
    out.spectra.reserve(indices.size());
    for (size_t i : indices) out.spectra.push_back(spectra.at(i));
    return out;
}

Spectrum generate_spectrum(int true_class, const std::vector<MetabolitePeak>& profile,
                           double baseline_amp, double noise_sigma, Rng& rng) {
    if (profile.empty()) throw ConfigError("generate_spectrum: empty metabolite profile");
    if (true_class != 0 && true_class != 1) throw std::invalid_argument("generate_spectrum: class must be 0 or 1");

    Spectrum s;
    s.values.assign(kSpectrumSamples, 0.0);
    s.label = s.true_label = true_class;

    for (const auto& p : profile) {
        if (p.center_index < 0 || p.center_index >= kSpectrumSamples)
            throw ConfigError("peak '" + p.name + "': center_index out of range");
        double amp = rng.uniform(p.amp_lo, p.amp_hi);
        double inv2w2 = 1.0 / (2.0 * p.width * p.width);
        for (int i = 0; i < kSpectrumSamples; ++i) {
            double d = i - p.center_index;
            s.values[static_cast<size_t>(i)] += amp * std::exp(-d * d * inv2w2);
        }
    }

    double c0 = rng.uniform(-1.0, 1.0), c1 = rng.uniform(-1.0, 1.0);
    double c2 = rng.uniform(-1.0, 1.0), c3 = rng.uniform(-1.0, 1.0);
    if (baseline_amp > 0.0) {
        for (int i = 0; i < kSpectrumSamples; ++i) {
            double x = 2.0 * i / (kSpectrumSamples - 1.0) - 1.0;
            s.values[static_cast<size_t>(i)] += baseline_amp * (c0 + x * (c1 + x * (c2 + x * c3)));
        }
    }

    if (noise_sigma > 0.0) {
        for (int i = 0; i < kSpectrumSamples; ++i)
            s.values[static_cast<size_t>(i)] += noise_sigma * rng.normal();
    }
    return s;
}

Dataset generate_cohort(const CohortConfig& config) {
    config.validate();
    Rng rng(config.seed);

    int n_tumor = static_cast<int>(std::lround(config.tumor_fraction * config.n_patients));
    n_tumor = std::clamp(n_tumor, 0, config.n_patients);
    std::vector<int> classes(static_cast<size_t>(config.n_patients), 0);
    std::fill(classes.begin(), classes.begin() + n_tumor, 1);
    rng.shuffle(classes);

    Dataset ds;
    ds.name = "cohort-" + std::to_string(config.seed);
    for (int p = 0; p < config.n_patients; ++p) {
        int cls = classes[static_cast<size_t>(p)];
        char id[16];
        std::snprintf(id, sizeof id, "P%04d", p + 1);
        size_t n_vox = static_cast<size_t>(config.voxels_min) +
                       rng.index(static_cast<size_t>(config.voxels_max - config.voxels_min) + 1);
        const auto& profile = config.class_profiles.at(cls);
        for (size_t v = 0; v < n_vox; ++v) {
            Spectrum s = generate_spectrum(cls, profile, config.baseline_distortion_amplitude,
                                           config.noise_sigma, rng);
            s.patient_id = id;
            switch (config.label_noise.mode) {
            case LabelNoiseSpec::Mode::none:
                break;
            case LabelNoiseSpec::Mode::asymmetric:
                // healthy tissue inside a tumor-affected region gets labeled tumor;
                // the reverse flip never happens
                if (s.true_label == 0 && rng.uniform() < config.label_noise.rate) s.label = 1;
                break;
            case LabelNoiseSpec::Mode::symmetric:
                if (rng.uniform() < config.label_noise.rate) s.label = 1 - s.true_label;
                break;
            }
            ds.spectra.push_back(std::move(s));
        }
    }
    return ds;
}

std::vector<FoldSplit> split_leave_subjects_out(const Dataset& dataset, int k, Rng& rng) {
    if (dataset.empty()) throw std::invalid_argument("split: empty dataset");
    std::vector<std::string> patients = dataset.patient_ids();
    if (k < 2)
        throw std::invalid_argument("split: k must be >= 2 (k=" + std::to_string(k) +
                                    " would leave an empty train side)");
    if (static_cast<size_t>(k) > patients.size())
        throw std::invalid_argument("split: k=" + std::to_string(k) + " exceeds patient count " +
                                    std::to_string(patients.size()));

    rng.shuffle(patients);
    // first (n % k) groups get one extra patient
    size_t n = patients.size(), base = n / static_cast<size_t>(k), extra = n % static_cast<size_t>(k);
    std::vector<std::vector<std::string>> groups;
    size_t pos = 0;
    for (int g = 0; g < k; ++g) {
        size_t len = base + (static_cast<size_t>(g) < extra ? 1 : 0);
        groups.emplace_back(patients.begin() + static_cast<long>(pos), patients.begin() + static_cast<long>(pos + len));
        pos += len;
    }

    std::vector<FoldSplit> folds(static_cast<size_t>(k));
    for (int g = 0; g < k; ++g) {
        auto& fold = folds[static_cast<size_t>(g)];
        fold.test_patients = groups[static_cast<size_t>(g)];
        std::set<std::string> test_set(fold.test_patients.begin(), fold.test_patients.end());
        for (size_t i = 0; i < dataset.size(); ++i) {
            if (test_set.count(dataset.spectra[i].patient_id))
                fold.test_indices.push_back(i);
            else
                fold.train_indices.push_back(i);
        }
    }
    return folds;
}

namespace {

double sq_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double t = a[i] - b[i];
        d += t * t;
    }
    return d;
}

} // namespace

Dataset oversample_minority(const Dataset& train, Rng& rng, int k_neighbors) {
    auto counts = train.label_counts();
    if (counts.count(0) == 0 || counts.count(1) == 0)
        throw std::invalid_argument("oversample_minority: both classes must be present");
    size_t n0 = counts[0], n1 = counts[1];
    if (n0 == n1) return train;

    int minority = n0 < n1 ? 0 : 1;
    size_t need = (n0 < n1 ? n1 - n0 : n0 - n1);
    std::vector<size_t> pool;
    for (size_t i = 0; i < train.size(); ++i)
        if (train.spectra[i].label == minority) pool.push_back(i);

    Dataset out = train;
    if (pool.size() == 1) {
        log_warn("oversample_minority: single minority sample, falling back to duplication");
        for (size_t j = 0; j < need; ++j) {
            Spectrum s = train.spectra[pool[0]];
            s.synthetic = true;
            s.true_label = -1;
            out.spectra.push_back(std::move(s));
        }
        return out;
    }

    size_t k = std::min<size_t>(static_cast<size_t>(k_neighbors), pool.size() - 1);
    // k nearest minority neighbours of each minority sample, by squared distance
    std::vector<std::vector<size_t>> neighbors(pool.size());
    for (size_t a = 0; a < pool.size(); ++a) {
        std::vector<std::pair<double, size_t>> dists;
        dists.reserve(pool.size() - 1);
        for (size_t b = 0; b < pool.size(); ++b) {
            if (b == a) continue;
            dists.emplace_back(sq_distance(train.spectra[pool[a]].values, train.spectra[pool[b]].values), pool[b]);
        }
        std::sort(dists.begin(), dists.end());
        for (size_t j = 0; j < k; ++j) neighbors[a].push_back(dists[j].second);
    }

    for (size_t j = 0; j < need; ++j) {
        size_t a = j % pool.size();
        const Spectrum& base = train.spectra[pool[a]];
        const Spectrum& nb = train.spectra[neighbors[a][rng.index(neighbors[a].size())]];
        double gap = rng.uniform();
        Spectrum s;
        s.values.resize(base.values.size());
        for (size_t i = 0; i < base.values.size(); ++i)
            s.values[i] = base.values[i] + gap * (nb.values[i] - base.values[i]);
        s.patient_id = base.patient_id;
        s.label = minority;
        s.true_label = -1;
        s.synthetic = true;
        out.spectra.push_back(std::move(s));
    }
    return out;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
    bool any_synth = false;
    for (const auto& s : dataset.spectra) any_synth |= s.synthetic;

    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_dataset: cannot open '" + path + "' for writing");

    out << "patient_id,label,true_label";
    for (int i = 0; i < kSpectrumSamples; ++i) out << ",v" << i;
    if (any_synth) out << ",synthetic";
    out << "\n";

    char buf[40];
    for (const auto& s : dataset.spectra) {
        if (s.values.size() != kSpectrumSamples)
            throw std::invalid_argument("save_dataset: spectrum has " + std::to_string(s.values.size()) +
                                        " values, expected " + std::to_string(kSpectrumSamples));
        out << s.patient_id << ',' << s.label << ',' << s.true_label;
        for (double v : s.values) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << ',' << buf;
        }
        if (any_synth) out << ',' << (s.synthetic ? 1 : 0);
        out << "\n";
    }
    if (!out) throw std::runtime_error("save_dataset: write to '" + path + "' failed");
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_dataset: cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": no records");

    // header determines whether the synthetic column is present
    std::string base_header = "patient_id,label,true_label";
    for (int i = 0; i < kSpectrumSamples; ++i) base_header += ",v" + std::to_string(i);
    bool has_synth;
    if (line == base_header)
        has_synth = false;
    else if (line == base_header + ",synthetic")
        has_synth = true;
    else
        throw ParseError(path + ": line 1: unrecognized header");

    size_t expect_fields = 3 + kSpectrumSamples + (has_synth ? 1 : 0);
    Dataset ds;
    ds.name = path;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (!line.empty() && line.back() == ',') fields.push_back("");
        if (fields.size() != expect_fields)
            throw ParseError(path + ": line " + std::to_string(line_no) + ": expected " +
                             std::to_string(expect_fields) + " fields, got " + std::to_string(fields.size()));

        Spectrum s;
        s.patient_id = fields[0];
        if (s.patient_id.empty())
            throw ParseError(path + ": line " + std::to_string(line_no) + ": empty patient id");
        try {
            s.label = std::stoi(fields[1]);
            s.true_label = std::stoi(fields[2]);
        } catch (const std::exception&) {
            throw ParseError(path + ": line " + std::to_string(line_no) + ": bad label field");
        }
        if (s.label != 0 && s.label != 1)
            throw ParseError(path + ": line " + std::to_string(line_no) + ": label must be 0 or 1");
        if (s.true_label < -1 || s.true_label > 1)
            throw ParseError(path + ": line " + std::to_string(line_no) + ": true_label must be -1, 0 or 1");

        s.values.resize(kSpectrumSamples);
        for (int i = 0; i < kSpectrumSamples; ++i) {
            const std::string& fv = fields[static_cast<size_t>(3 + i)];
            char* end = nullptr;
            double v = std::strtod(fv.c_str(), &end);
            if (end == fv.c_str() || *end != '\0' || !std::isfinite(v))
                throw ParseError(path + ": line " + std::to_string(line_no) + ": non-finite or malformed value '" +
                                 fv + "' at v" + std::to_string(i));
            s.values[static_cast<size_t>(i)] = v;
        }
        if (has_synth) s.synthetic = fields.back() == "1";
        ds.spectra.push_back(std::move(s));
    }
    if (ds.empty()) throw ParseError(path + ": no records");
    return ds;
}

} // namespace specmix::spectra
