#pragma once

#include "opwg/datasets.hpp"
#include "opwg/gaussian.hpp"
#include "opwg/image.hpp"
#include "opwg/imageseg.hpp"
#include "opwg/lab.hpp"
#include "opwg/lambda_bound.hpp"
#include "opwg/metrics.hpp"
#include "opwg/mixture.hpp"
#include "opwg/model_selection.hpp"
#include "opwg/pwg_em.hpp"
#include "opwg/serialization.hpp"
#include "opwg/stream.hpp"
