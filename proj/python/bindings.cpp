// Python bindings for the core operations: cohort generation, training,
// distillation, augmentation, evaluation, clustering, CAM, and the full
// experiment pipeline. Configs cross the boundary as plain dicts (missing
// keys keep C++ defaults); bulk data as numpy arrays.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "specmix/analyze.hpp"
#include "specmix/augment.hpp"
#include "specmix/common.hpp"
#include "specmix/config_io.hpp"
#include "specmix/distill.hpp"
#include "specmix/eval.hpp"
#include "specmix/nn.hpp"
#include "specmix/pipeline.hpp"
#include "specmix/rng.hpp"
#include "specmix/spectra.hpp"
#include "specmix/tensor.hpp"

namespace py = pybind11;
using namespace specmix;
using nlohmann::json;

namespace {

json py_to_json(const py::handle& h) {
    if (h.is_none()) return nullptr;
    if (py::isinstance<py::bool_>(h)) return h.cast<bool>();
    if (py::isinstance<py::int_>(h)) return h.cast<int64_t>();
    if (py::isinstance<py::float_>(h)) return h.cast<double>();
    if (py::isinstance<py::str>(h)) return h.cast<std::string>();
    if (py::isinstance<py::dict>(h)) {
        json j = json::object();
        for (auto item : h.cast<py::dict>())
            j[py::str(item.first).cast<std::string>()] = py_to_json(item.second);
        return j;
    }
    if (py::isinstance<py::list>(h) || py::isinstance<py::tuple>(h)) {
        json j = json::array();
        for (auto item : h.cast<py::sequence>()) j.push_back(py_to_json(item));
        return j;
    }
    throw py::type_error("unsupported config value of type " +
                         py::str(py::type::of(h)).cast<std::string>());
}

py::object json_to_py(const json& j) {
    switch (j.type()) {
    case json::value_t::null: return py::none();
    case json::value_t::boolean: return py::bool_(j.get<bool>());
    case json::value_t::number_integer: return py::int_(j.get<int64_t>());
    case json::value_t::number_unsigned: return py::int_(j.get<uint64_t>());
    case json::value_t::number_float: return py::float_(j.get<double>());
    case json::value_t::string: return py::str(j.get<std::string>());
    case json::value_t::array: {
        py::list out;
        for (const auto& item : j) out.append(json_to_py(item));
        return out;
    }
    case json::value_t::object: {
        py::dict out;
        for (auto it = j.begin(); it != j.end(); ++it)
            out[py::str(it.key())] = json_to_py(it.value());
        return out;
    }
    default: throw py::value_error("unsupported JSON value");
    }
}

template <typename Config>
Config config_from_dict(const py::object& obj) {
    Config c{};
    if (!obj.is_none()) py_to_json(obj).get_to(c);
    return c;
}

py::array_t<double> dataset_values(const spectra::Dataset& ds) {
    const py::ssize_t n = static_cast<py::ssize_t>(ds.spectra.size());
    const py::ssize_t len = n ? static_cast<py::ssize_t>(ds.spectra[0].values.size()) : 0;
    py::array_t<double> out({n, len});
    auto view = out.mutable_unchecked<2>();
    for (py::ssize_t i = 0; i < n; ++i) {
        const auto& v = ds.spectra[static_cast<size_t>(i)].values;
        if (static_cast<py::ssize_t>(v.size()) != len)
            throw py::value_error("dataset holds spectra of mixed lengths");
        for (py::ssize_t j = 0; j < len; ++j) view(i, j) = v[static_cast<size_t>(j)];
    }
    return out;
}

spectra::Dataset dataset_from_arrays(const py::array_t<double, py::array::c_style | py::array::forcecast>& values,
                                     const std::vector<int>& labels,
                                     const std::vector<std::string>& patient_ids,
                                     const std::vector<int>& true_labels) {
    if (values.ndim() != 2) throw py::value_error("values must be a 2-d array [n, length]");
    const auto n = values.shape(0);
    const auto len = values.shape(1);
    if (static_cast<py::ssize_t>(labels.size()) != n)
        throw py::value_error("labels length does not match values");
    if (!patient_ids.empty() && static_cast<py::ssize_t>(patient_ids.size()) != n)
        throw py::value_error("patient_ids length does not match values");
    if (!true_labels.empty() && static_cast<py::ssize_t>(true_labels.size()) != n)
        throw py::value_error("true_labels length does not match values");
    auto view = values.unchecked<2>();
    spectra::Dataset ds;
    ds.name = "from-arrays";
    for (py::ssize_t i = 0; i < n; ++i) {
        spectra::Spectrum s;
        s.values.resize(static_cast<size_t>(len));
        for (py::ssize_t j = 0; j < len; ++j) s.values[static_cast<size_t>(j)] = view(i, j);
        s.label = labels[static_cast<size_t>(i)];
        s.true_label = true_labels.empty() ? -1 : true_labels[static_cast<size_t>(i)];
        s.patient_id = patient_ids.empty() ? "P" + std::to_string(i + 1)
                                           : patient_ids[static_cast<size_t>(i)];
        ds.spectra.push_back(std::move(s));
    }
    return ds;
}

py::array_t<double> tensor_to_array2(const Tensor& t) {
    if (t.shape.size() != 2) throw py::value_error("expected a rank-2 tensor");
    py::array_t<double> out({static_cast<py::ssize_t>(t.shape[0]),
                             static_cast<py::ssize_t>(t.shape[1])});
    std::copy(t.data.begin(), t.data.end(), out.mutable_data());
    return out;
}

std::vector<std::vector<double>> points_from_array(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw py::value_error("points must be a 2-d array [n, dim]");
    auto view = arr.unchecked<2>();
    std::vector<std::vector<double>> pts(static_cast<size_t>(arr.shape(0)),
                                         std::vector<double>(static_cast<size_t>(arr.shape(1))));
    for (py::ssize_t i = 0; i < arr.shape(0); ++i)
        for (py::ssize_t j = 0; j < arr.shape(1); ++j)
            pts[static_cast<size_t>(i)][static_cast<size_t>(j)] = view(i, j);
    return pts;
}

spectra::Spectrum spectrum_from_array(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 1) throw py::value_error("spectrum must be a 1-d array");
    auto view = arr.unchecked<1>();
    spectra::Spectrum s;
    s.values.resize(static_cast<size_t>(view.shape(0)));
    for (py::ssize_t i = 0; i < view.shape(0); ++i) s.values[static_cast<size_t>(i)] = view(i);
    return s;
}

struct Model {
    nn::Network net;
};

py::dict eval_report_dict(const eval::EvalReport& r) {
    json j;
    eval::to_json(j, r);
    return json_to_py(j).cast<py::dict>();
}

py::dict cell_dict(const pipeline::CellResult& c) {
    py::dict d;
    d["fold"] = c.fold;
    d["seed"] = c.seed;
    d["ok"] = c.ok;
    d["error"] = c.error;
    d["observed"] = eval_report_dict(c.observed);
    if (c.has_truth) d["against_truth"] = eval_report_dict(c.against_truth);
    d["n_certain"] = c.n_certain;
    d["n_augmented"] = c.n_augmented;
    return d;
}

py::dict summary_dict(const eval::CvSummary& s) {
    json j;
    eval::to_json(j, s);
    return json_to_py(j).cast<py::dict>();
}

py::dict experiment_dict(const pipeline::ExperimentResult& r) {
    py::dict d;
    d["run_dir"] = r.run_dir;
    d["summary"] = summary_dict(r.summary);
    if (r.has_truth) d["summary_truth"] = summary_dict(r.summary_truth);
    d["n_failed"] = r.n_failed;
    py::list cells;
    for (const auto& c : r.cells) cells.append(cell_dict(c));
    d["cells"] = cells;
    return d;
}

}  // namespace

PYBIND11_MODULE(specmix, m) {
    m.doc() = "noisy-label spectra pipeline: cohort generation, residual CNN "
              "training, confidence distillation, mixing augmentation, "
              "evaluation, and analysis";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

    m.attr("SPECTRUM_SAMPLES") = static_cast<int>(spectra::kSpectrumSamples);

    py::class_<spectra::Dataset>(m, "Dataset")
        .def_static(
            "from_arrays",
            [](const py::array_t<double, py::array::c_style | py::array::forcecast>& values,
               const std::vector<int>& labels, const std::vector<std::string>& patient_ids,
               const std::vector<int>& true_labels) {
                return dataset_from_arrays(values, labels, patient_ids, true_labels);
            },
            py::arg("values"), py::arg("labels"),
            py::arg("patient_ids") = std::vector<std::string>{},
            py::arg("true_labels") = std::vector<int>{})
        .def("__len__", [](const spectra::Dataset& ds) { return ds.spectra.size(); })
        .def_property_readonly("values", &dataset_values)
        .def_property_readonly("labels",
                               [](const spectra::Dataset& ds) {
                                   std::vector<int> out;
                                   for (const auto& s : ds.spectra) out.push_back(s.label);
                                   return out;
                               })
        .def_property_readonly("true_labels",
                               [](const spectra::Dataset& ds) {
                                   std::vector<int> out;
                                   for (const auto& s : ds.spectra) out.push_back(s.true_label);
                                   return out;
                               })
        .def_property_readonly("patient_ids",
                               [](const spectra::Dataset& ds) {
                                   std::vector<std::string> out;
                                   for (const auto& s : ds.spectra) out.push_back(s.patient_id);
                                   return out;
                               })
        .def_property_readonly("synthetic",
                               [](const spectra::Dataset& ds) {
                                   std::vector<bool> out;
                                   for (const auto& s : ds.spectra) out.push_back(s.synthetic);
                                   return out;
                               })
        .def("subset", &spectra::Dataset::subset, py::arg("indices"))
        .def("__repr__", [](const spectra::Dataset& ds) {
            return "<Dataset '" + ds.name + "' with " + std::to_string(ds.spectra.size()) +
                   " spectra>";
        });

    m.def(
        "generate_cohort",
        [](const py::dict& config) {
            return spectra::generate_cohort(config_from_dict<spectra::CohortConfig>(config));
        },
        py::arg("config"));
    m.def("load_dataset", &spectra::load_dataset, py::arg("path"));
    m.def("save_dataset", &spectra::save_dataset, py::arg("dataset"), py::arg("path"));
    m.def(
        "split_leave_subjects_out",
        [](const spectra::Dataset& ds, int k, uint64_t seed) {
            Rng rng(seed);
            py::list out;
            for (const auto& fold : spectra::split_leave_subjects_out(ds, k, rng)) {
                py::dict d;
                d["train_indices"] = fold.train_indices;
                d["test_indices"] = fold.test_indices;
                d["test_patients"] = fold.test_patients;
                out.append(d);
            }
            return out;
        },
        py::arg("dataset"), py::arg("k"), py::arg("seed"));
    m.def(
        "oversample_minority",
        [](const spectra::Dataset& ds, uint64_t seed, int k_neighbors) {
            Rng rng(seed);
            return spectra::oversample_minority(ds, rng, k_neighbors);
        },
        py::arg("dataset"), py::arg("seed"), py::arg("k_neighbors") = 5);
    m.def("clean_label_fraction", &pipeline::clean_label_fraction, py::arg("dataset"));

    py::class_<Model>(m, "Network")
        .def_property_readonly("config",
                               [](const Model& mdl) {
                                   json j;
                                   nn::to_json(j, mdl.net.config);
                                   return json_to_py(j);
                               })
        .def_property_readonly("conv_kernel_count",
                               [](const Model& mdl) { return mdl.net.conv_kernel_count(); })
        .def(
            "predict_proba",
            [](const Model& mdl, const spectra::Dataset& ds) {
                return tensor_to_array2(nn::predict_proba(mdl.net, ds));
            },
            py::arg("dataset"))
        .def(
            "shape_trace",
            [](const Model& mdl, int batch) {
                Rng rng(0);
                Tensor input = Tensor::zeros({batch, mdl.net.config.input_length, 1});
                for (auto& v : input.data) v = rng.normal();
                nn::ShapeTrace trace;
                mdl.net.forward_eval(input, &trace);
                py::list out;
                for (const auto& [name, shape] : trace.entries)
                    out.append(py::make_tuple(name, shape));
                return out;
            },
            py::arg("batch_size") = 1)
        .def(
            "save",
            [](const Model& mdl, const std::string& path) {
                nn::save_network(mdl.net, path);
            },
            py::arg("path"))
        .def_static("load", [](const std::string& path) {
            auto loaded = nn::load_network(path);
            return Model{std::move(loaded.net)};
        });

    m.def(
        "train_network",
        [](const spectra::Dataset& train_set, const py::object& valid_set,
           const py::object& network, const py::object& train, uint64_t seed) {
            auto ncfg = config_from_dict<nn::NetworkConfig>(network);
            auto tcfg = config_from_dict<nn::TrainConfig>(train);
            Rng init_rng = Rng(seed).child(0x817);
            tcfg.seed = Rng(seed).child(0x7EA1).seed();
            Model mdl{nn::Network::init(ncfg, init_rng)};
            spectra::Dataset empty;
            const auto& valid =
                valid_set.is_none() ? empty : valid_set.cast<const spectra::Dataset&>();
            const auto log = nn::train(mdl.net, train_set, valid, tcfg);
            json jlog;
            nn::to_json(jlog, log);
            return py::make_tuple(std::move(mdl), json_to_py(jlog));
        },
        py::arg("train_set"), py::arg("valid_set") = py::none(), py::arg("network") = py::none(),
        py::arg("train") = py::none(), py::arg("seed") = 1);

    m.def(
        "run_distillation",
        [](const spectra::Dataset& ds, const py::object& config, uint64_t seed) {
            auto res =
                distill::run_distillation(ds, config_from_dict<distill::DistillConfig>(config), seed);
            py::dict d;
            d["member_indices"] = res.certain.member_indices;
            d["first_certain_epoch"] = res.certain.first_certain_epoch;
            d["per_epoch_counts"] = res.certain.per_epoch_counts;
            d["network"] = Model{std::move(res.network)};
            return d;
        },
        py::arg("dataset"), py::arg("config") = py::none(), py::arg("seed") = 1);

    m.def(
        "distance_shift_report",
        [](const spectra::Dataset& ds, const std::vector<int64_t>& certain_indices, int n_bins) {
            const auto rep = distill::distance_shift_report(ds, certain_indices, n_bins);
            py::list classes;
            for (const auto& cls : rep.classes) {
                py::dict d;
                d["class_label"] = cls.class_label;
                d["bin_edges"] = cls.bin_edges;
                d["full_counts"] = cls.full_counts;
                d["distilled_counts"] = cls.distilled_counts;
                d["full_median"] = cls.full_median;
                d["distilled_median"] = cls.distilled_median;
                d["distilled_empty"] = cls.distilled_empty;
                classes.append(d);
            }
            return classes;
        },
        py::arg("dataset"), py::arg("certain_indices"), py::arg("n_bins") = 30);

    m.def(
        "mix_samples",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& target,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& partner,
           double alpha) {
            const auto mixed = augment::mix_samples(spectrum_from_array(target),
                                                    spectrum_from_array(partner), alpha);
            return py::array_t<double>({static_cast<py::ssize_t>(mixed.values.size())},
                                       mixed.values.data());
        },
        py::arg("target"), py::arg("partner"), py::arg("alpha"));

    m.def(
        "augment_set",
        [](const spectra::Dataset& certain, const py::object& config) {
            spectra::Dataset out;
            out.name = certain.name + "-augmented";
            out.spectra =
                augment::augment_set(certain.spectra, config_from_dict<augment::AugmentConfig>(config));
            return out;
        },
        py::arg("certain"), py::arg("config") = py::none());

    m.def("auc", &eval::auc, py::arg("labels"), py::arg("scores"));
    m.def(
        "roc_curve",
        [](const std::vector<int>& labels, const std::vector<double>& scores) {
            const auto curve = eval::roc_curve(labels, scores);
            py::array_t<double> out({static_cast<py::ssize_t>(curve.size()), py::ssize_t(3)});
            auto view = out.mutable_unchecked<2>();
            for (py::ssize_t i = 0; i < static_cast<py::ssize_t>(curve.size()); ++i) {
                view(i, 0) = curve[static_cast<size_t>(i)].threshold;
                view(i, 1) = curve[static_cast<size_t>(i)].fpr;
                view(i, 2) = curve[static_cast<size_t>(i)].tpr;
            }
            return out;
        },
        py::arg("labels"), py::arg("scores"));
    m.def(
        "evaluate",
        [](const std::vector<int>& labels, const std::vector<double>& scores,
           const py::object& patient_ids, const py::object& patient_labels,
           const py::object& probs) {
            if (patient_ids.is_none())
                return eval_report_dict(eval::evaluate(labels, scores));
            return eval_report_dict(eval::evaluate(
                labels, scores, patient_ids.cast<std::vector<std::string>>(),
                patient_labels.cast<std::map<std::string, int>>(),
                probs.cast<std::vector<std::vector<double>>>()));
        },
        py::arg("labels"), py::arg("scores"), py::arg("patient_ids") = py::none(),
        py::arg("patient_labels") = py::none(), py::arg("probs") = py::none());

    m.def(
        "kmeans",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& points, int k,
           uint64_t seed, int max_iter, double tol) {
            const auto res = analyze::kmeans(points_from_array(points), k, seed, max_iter, tol);
            py::dict d;
            d["k"] = res.k;
            d["assignments"] = res.assignments;
            d["centroids"] = res.centroids;
            d["inertia"] = res.inertia;
            d["iterations"] = res.iterations;
            return d;
        },
        py::arg("points"), py::arg("k"), py::arg("seed") = 0, py::arg("max_iter") = 100,
        py::arg("tol") = 1e-6);
    m.def(
        "elbow_scan",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& points,
           const std::vector<int>& k_values, uint64_t seed, int restarts) {
            py::list out;
            for (const auto& p : analyze::elbow_scan(points_from_array(points), k_values, seed,
                                                     restarts)) {
                py::dict d;
                d["k"] = p.k;
                d["inertia"] = p.inertia;
                d["inertia_monotone"] = p.inertia_monotone;
                out.append(d);
            }
            return out;
        },
        py::arg("points"), py::arg("k_values"), py::arg("seed") = 0, py::arg("restarts") = 10);
    m.def(
        "crosstab",
        [](const std::vector<int>& assignments, const std::vector<int>& labels, int k) {
            const auto tab = analyze::crosstab(assignments, labels, k);
            py::dict d;
            d["class_labels"] = tab.class_labels;
            d["counts"] = tab.counts;
            d["percent"] = tab.percent;
            return d;
        },
        py::arg("assignments"), py::arg("labels"), py::arg("k"));
    m.def(
        "class_activation_map",
        [](const Model& mdl,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& values,
           int class_index, bool linear_upsample) {
            const auto cam = analyze::class_activation_map(mdl.net, spectrum_from_array(values),
                                                           class_index, linear_upsample);
            py::dict d;
            d["class_index"] = cam.class_index;
            d["logit"] = cam.logit;
            d["bias"] = cam.bias;
            d["raw"] = cam.raw;
            d["upsampled"] = cam.upsampled;
            return d;
        },
        py::arg("network"), py::arg("values"), py::arg("class_index"),
        py::arg("linear_upsample") = false);

    m.def(
        "run_experiment",
        [](const py::dict& config) {
            return experiment_dict(
                pipeline::run_experiment(config_from_dict<pipeline::ExperimentConfig>(config)));
        },
        py::arg("config"));
    m.def(
        "run_sweep",
        [](const py::dict& config) {
            const auto res =
                pipeline::run_sweep(config_from_dict<pipeline::ExperimentConfig>(config));
            py::dict d;
            d["sweep_dir"] = res.sweep_dir;
            py::list points;
            for (const auto& p : res.points) {
                py::dict pd;
                pd["strategy"] = p.strategy;
                pd["alpha"] = p.alpha;
                pd["factor"] = p.factor;
                pd["max_epoch"] = p.max_epoch;
                pd["ok"] = p.ok;
                pd["error"] = p.error;
                if (p.ok) pd["result"] = experiment_dict(p.result);
                points.append(pd);
            }
            d["points"] = points;
            return d;
        },
        py::arg("config"));
    m.def(
        "config_hash",
        [](const py::dict& config) {
            char buf[24];
            std::snprintf(buf, sizeof buf, "%016llx",
                          static_cast<unsigned long long>(pipeline::config_hash(
                              config_from_dict<pipeline::ExperimentConfig>(config))));
            return std::string(buf);
        },
        py::arg("config"));
    m.def(
        "audit_no_leakage",
        [](const std::string& run_dir) {
            return pipeline::audit_no_leakage(run_dir).cells_checked;
        },
        py::arg("run_dir"));
}
