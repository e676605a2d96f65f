#pragma once

#include "ctsf/layers/conv1d.hpp"
#include "ctsf/layers/deconv1d.hpp"
#include "ctsf/layers/dense.hpp"
#include "ctsf/layers/init.hpp"
#include "ctsf/layers/pool.hpp"
#include "ctsf/layers/recurrent.hpp"
