#pragma once

#include "metricdiff/core.hpp"
#include "metricdiff/dyadic.hpp"
#include "metricdiff/polyhedral.hpp"
#include "metricdiff/metricspace.hpp"
#include "metricdiff/corpus.hpp"
#include "metricdiff/lp.hpp"
#include "metricdiff/hull.hpp"
#include "metricdiff/parallel.hpp"
#include "metricdiff/beta.hpp"
#include "metricdiff/seminorm.hpp"
#include "metricdiff/carleson.hpp"
#include "metricdiff/report.hpp"
