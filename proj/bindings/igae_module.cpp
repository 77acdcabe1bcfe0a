#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "igae/cli.hpp"
#include "igae/pipelines.hpp"

namespace py = pybind11;
using namespace igae;

namespace {

Tensor tensor_from_array(const py::array_t<float, py::array::c_style |
                                                      py::array::forcecast>& a,
                         bool requires_grad) {
  Shape shape(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i)
    shape[i] = static_cast<int>(a.shape(i));
  std::vector<float> data(a.data(), a.data() + a.size());
  return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

py::array_t<float> array_from(const Shape& shape,
                              const std::vector<float>& data) {
  std::vector<py::ssize_t> dims(shape.begin(), shape.end());
  if (dims.empty()) dims.push_back(1);
  py::array_t<float> out(dims);
  std::copy(data.begin(), data.end(), out.mutable_data());
  return out;
}

py::array_t<float> image_to_array(const Image& img) {
  return array_from({img.channels, img.height, img.width}, img.data);
}

Image image_from_array(const py::array_t<float, py::array::c_style |
                                                    py::array::forcecast>& a) {
  if (a.ndim() != 3) throw std::invalid_argument("expected a [C,H,W] array");
  Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
            static_cast<int>(a.shape(2)));
  std::copy(a.data(), a.data() + a.size(), img.data.begin());
  return img;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "latent-space neural fields with a 3D-aware autoencoder";

  py::class_<Rng>(m, "Rng")
      .def(py::init<uint64_t>(), py::arg("seed") = 0)
      .def("uniform", [](Rng& r) { return r.uniform(); })
      .def("normal", &Rng::normal)
      .def("counter", &Rng::counter)
      .def("derive",
           [](const Rng& r, const std::string& label) {
             return r.derive(std::string_view(label));
           });

  py::class_<Tensor>(m, "Tensor")
      .def(py::init([](const py::array_t<float, py::array::c_style |
                                                    py::array::forcecast>& a,
                       bool requires_grad) {
             return tensor_from_array(a, requires_grad);
           }),
           py::arg("array"), py::arg("requires_grad") = false)
      .def_property_readonly("shape", &Tensor::shape)
      .def_property_readonly("requires_grad", &Tensor::requires_grad)
      .def("numpy", [](const Tensor& t) { return array_from(t.shape(), t.data()); })
      .def("grad_numpy",
           [](const Tensor& t) {
             if (t.grad().empty())
               throw std::runtime_error("tensor has no gradient buffer");
             return array_from(t.shape(), t.grad());
           })
      .def("backward", &Tensor::backward)
      .def("zero_grad", &Tensor::zero_grad)
      .def("item", &Tensor::item);

  m.def("add", &add<float>);
  m.def("sub", &sub<float>);
  m.def("mul", &mul<float>);
  m.def("scale", &scale<float>);
  m.def("exp", &igae::exp<float>);
  m.def("softplus", &softplus<float>);
  m.def("sigmoid", &igae::sigmoid<float>);
  m.def("silu", &silu<float>);
  m.def("relu", &relu<float>);
  m.def("square", &square<float>);
  m.def("sum", &igae::sum<float>);
  m.def("mean", &igae::mean<float>);
  m.def("mse", &igae::mse<float>);
  m.def("linear", &linear<float>);
  m.def("conv2d", &conv2d<float>, py::arg("x"), py::arg("kernel"),
        py::arg("stride") = 1, py::arg("pad") = 1);
  m.def("upsample_nearest2x", &upsample_nearest2x<float>);
  m.def("grid_sample_bilinear", &grid_sample_bilinear<float>);
  m.def("composite_rays", &composite_rays<float>);
  m.def("tv_image", &tv_image<float>, py::arg("img"), py::arg("p") = 2,
        py::arg("q") = 2);

  py::class_<CameraPose>(m, "CameraPose")
      .def_readonly("fov_y", &CameraPose::fov_y)
      .def_readonly("height", &CameraPose::height)
      .def_readonly("width", &CameraPose::width)
      .def("forward", &CameraPose::forward)
      .def("orthonormal", &CameraPose::orthonormal, py::arg("tol") = 1e-6);

  py::class_<Vec3>(m, "Vec3")
      .def(py::init([](double x, double y, double z) {
             return Vec3{x, y, z};
           }),
           py::arg("x"), py::arg("y"), py::arg("z"))
      .def_readonly("x", &Vec3::x)
      .def_readonly("y", &Vec3::y)
      .def_readonly("z", &Vec3::z)
      .def("norm", &Vec3::norm);

  m.def("look_at_pose", &look_at_pose, py::arg("position"), py::arg("target"),
        py::arg("fov_y"), py::arg("height"), py::arg("width"));
  m.def("sample_poses_on_sphere",
        [](int count, double radius, uint64_t seed, double fov_y, int height,
           int width) {
          Rng rng(seed);
          return sample_poses_on_sphere(count, radius, rng, fov_y, height,
                                        width);
        },
        py::arg("count"), py::arg("radius"), py::arg("seed") = 0,
        py::arg("fov_y") = 0.9, py::arg("height") = 64, py::arg("width") = 64);

  py::class_<ProceduralScene>(m, "ProceduralScene")
      .def_property_readonly("primitive_count",
                             [](const ProceduralScene& s) {
                               return s.primitives.size();
                             })
      .def_readonly("radius", &ProceduralScene::radius)
      .def_readonly("seed", &ProceduralScene::seed);

  m.def("make_scene", &make_scene, py::arg("seed"), py::arg("difficulty") = 1);
  m.def("render_gt_view",
        [](const ProceduralScene& scene, const CameraPose& pose, int h,
           int w) { return image_to_array(render_gt_view(scene, pose, h, w)); },
        py::arg("scene"), py::arg("pose"), py::arg("h"), py::arg("w"));

  py::class_<AutoencoderSpec>(m, "AutoencoderSpec")
      .def(py::init([](int downscale, int channels) {
             AutoencoderSpec spec;
             spec.downscale = downscale;
             spec.channels = channels;
             spec.schedule = AutoencoderSpec::default_schedule(downscale);
             return spec;
           }),
           py::arg("downscale") = 4, py::arg("channels") = 8)
      .def_readonly("downscale", &AutoencoderSpec::downscale)
      .def_readonly("channels", &AutoencoderSpec::channels);

  py::class_<AutoencoderT<float>>(m, "Autoencoder")
      .def(py::init([](const AutoencoderSpec& spec, uint64_t seed) {
             Rng rng(seed);
             return AutoencoderT<float>::make(spec, rng);
           }),
           py::arg("spec") = AutoencoderSpec{}, py::arg("seed") = 0)
      .def("encode", &AutoencoderT<float>::encode)
      .def("decode", &AutoencoderT<float>::decode)
      .def_property_readonly("spec",
                             [](const AutoencoderT<float>& ae) {
                               return ae.spec;
                             });

  m.def("encoder_fingerprint", &encoder_fingerprint<float>);

  m.def("psnr",
        [](const py::array_t<float, py::array::c_style |
                                        py::array::forcecast>& a,
           const py::array_t<float, py::array::c_style |
                                        py::array::forcecast>& b) {
          return psnr(image_from_array(a), image_from_array(b));
        });
  m.def("ssim",
        [](const py::array_t<float, py::array::c_style |
                                        py::array::forcecast>& a,
           const py::array_t<float, py::array::c_style |
                                        py::array::forcecast>& b) {
          return ssim(image_from_array(a), image_from_array(b));
        });

  m.def("cli_main", [](const std::vector<std::string>& args) {
    std::vector<std::string> full{"igae"};
    full.insert(full.end(), args.begin(), args.end());
    return cli_dispatch(full);
  });
}
