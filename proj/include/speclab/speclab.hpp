#pragma once

#include "speclab/errors.hpp"
#include "speclab/mesh.hpp"
#include "speclab/metric.hpp"
#include "speclab/flat_torus.hpp"
#include "speclab/operators.hpp"
#include "speclab/spectrum.hpp"
#include "speclab/sampling.hpp"
#include "speclab/deformation.hpp"
#include "speclab/fd_check.hpp"
#include "speclab/psd.hpp"
#include "speclab/criticality.hpp"
#include "speclab/flow.hpp"
#include "speclab/io.hpp"
#include "speclab/cli.hpp"
