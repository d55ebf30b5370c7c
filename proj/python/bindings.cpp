#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "dpngan/activations.hpp"
#include "dpngan/cli.hpp"
#include "dpngan/config.hpp"
#include "dpngan/data.hpp"
#include "dpngan/error.hpp"
#include "dpngan/dsp.hpp"
#include "dpngan/metrics.hpp"
#include "dpngan/training.hpp"
#include "dpngan/verification.hpp"
#include "dpngan/wav.hpp"

namespace py = pybind11;
using namespace dpngan;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) {
  if (a.ndim() != 1) throw py::value_error("expected a one-dimensional array");
  return std::vector<double>(a.data(), a.data() + a.size());
}

Array matrix(std::size_t rows, std::size_t cols, const std::vector<double>& values) {
  Array out({rows, cols});
  std::copy(values.begin(), values.end(), out.mutable_data());
  return out;
}

MelParams mel_params(int sample_rate, std::size_t n_fft, std::size_t hop, std::size_t n_mels) {
  MelParams p;
  p.sample_rate = sample_rate;
  p.n_fft = n_fft;
  p.hop = hop;
  p.n_mels = n_mels;
  return p;
}

}  // namespace

PYBIND11_MODULE(_dpngan, m) {
  m.doc() = "Bindings for the dpngan vocoder library";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ValueError>(m, "ValueError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("triangle_wave", py::vectorize(static_cast<double (*)(double)>(&triangle_wave)));
  m.def("periodic_relu", py::vectorize(static_cast<double (*)(double)>(&periodic_relu)));
  m.def("ada_prelu", py::vectorize(static_cast<double (*)(double, double)>(&ada_prelu)), py::arg("x"),
        py::arg("delta"));
  m.def(
      "filter_response",
      [](double omega, double cutoff, bool high_pass) {
        return transfer({cutoff, high_pass ? FilterKind::high_pass : FilterKind::low_pass}, omega);
      },
      py::arg("omega"), py::arg("cutoff"), py::arg("high_pass") = false);

  m.def(
      "mel_spectrogram",
      [](const Array& x, int sample_rate, std::size_t n_fft, std::size_t hop, std::size_t n_mels) {
        const MelSpectrogram mel = mel_spectrogram(to_vector(x), mel_params(sample_rate, n_fft, hop, n_mels));
        return matrix(mel.n_mels, mel.n_frames, mel.values);
      },
      py::arg("x"), py::arg("sample_rate"), py::arg("n_fft"), py::arg("hop"), py::arg("n_mels"));
  m.def(
      "mfcc",
      [](const Array& x, int sample_rate, std::size_t n_fft, std::size_t hop, std::size_t n_mels, std::size_t n_coeffs) {
        const FeatureMatrix f = mfcc(to_vector(x), mel_params(sample_rate, n_fft, hop, n_mels), n_coeffs);
        return matrix(f.rows, f.cols, f.values);
      },
      py::arg("x"), py::arg("sample_rate"), py::arg("n_fft"), py::arg("hop"), py::arg("n_mels"), py::arg("n_coeffs") = 13);
  m.def(
      "sdtw_cost",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& patch,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& reference) {
        auto as_matrix = [](const Array& a) {
          if (a.ndim() != 2) throw py::value_error("expected a [features, frames] array");
          return FeatureMatrix{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                               std::vector<double>(a.data(), a.data() + a.size())};
        };
        return sdtw_cost(as_matrix(patch), as_matrix(reference));
      },
      py::arg("patch"), py::arg("reference"));
  m.def(
      "warpq",
      [](const Array& reference, const Array& degraded, int sample_rate, std::size_t n_fft, std::size_t hop,
         std::size_t n_mels, double patch_seconds) {
        MetricParams p;
        p.mel = mel_params(sample_rate, n_fft, hop, n_mels);
        p.patch_seconds = patch_seconds;
        return warpq({to_vector(reference), sample_rate}, {to_vector(degraded), sample_rate}, p);
      },
      py::arg("reference"), py::arg("degraded"), py::arg("sample_rate"), py::arg("n_fft") = 512, py::arg("hop") = 128,
      py::arg("n_mels") = 32, py::arg("patch_seconds") = 0.4);

  m.def(
      "read_wav",
      [](const std::filesystem::path& path) {
        AudioClip clip = read_wav(path);
        Array samples(static_cast<py::ssize_t>(clip.samples.size()));
        std::copy(clip.samples.begin(), clip.samples.end(), samples.mutable_data());
        return py::make_tuple(samples, clip.sample_rate);
      },
      py::arg("path"));
  m.def(
      "write_wav",
      [](const std::filesystem::path& path, const Array& samples, int sample_rate) {
        write_wav(path, {to_vector(samples), sample_rate});
      },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate"));

  m.def(
      "synth_dataset",
      [](std::size_t n_items, std::size_t length, int sample_rate, std::uint64_t seed) {
        const Corpus corpus = synth_dataset(n_items, length, sample_rate, seed);
        py::list out;
        for (const auto& item : corpus.items) {
          Array samples(static_cast<py::ssize_t>(item.clip.samples.size()));
          std::copy(item.clip.samples.begin(), item.clip.samples.end(), samples.mutable_data());
          out.append(py::make_tuple(item.name, samples, item.attributes.class_id));
        }
        return out;
      },
      py::arg("n_items"), py::arg("length"), py::arg("sample_rate"), py::arg("seed") = 0);

  m.def("profile_text", [](const std::string& name) { return to_text(load_profile(name)); }, py::arg("name"));
  m.def("ablation_names", &ablation_names);
  m.def(
      "gradient_suite",
      [](const std::string& profile, std::uint64_t seed) {
        const SuiteResult r = run_gradient_suite(load_profile(profile), seed);
        py::dict out;
        for (const auto& c : r.cases) out[py::str(c.name)] = py::make_tuple(c.report.passed, c.report.max_relative_error);
        return out;
      },
      py::arg("profile") = "toy", py::arg("seed") = 0);
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"dpngan"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
