"""Pipeline orchestration and emission of the table/figure artifacts.

Every stage reads its predecessor's files and writes plain text (delimited
tables, flat model format, SVG figures), so a bundle is byte-reproducible
from the config and seed alone; the manifest records content hashes.
"""

from __future__ import annotations

import dataclasses
import hashlib
import logging
import os
from dataclasses import dataclass
from datetime import date

import numpy as np

from . import cda as cda_mod
from . import mca as mca_mod
from . import register, som, superclass, synth
from .errors import ConfigError, DataError
from .svg import SvgCanvas, grey_level

logger = logging.getLogger("regsom")


@dataclass
class PipelineConfig:
    input: str | None = None       # register csv; None means synthesize
    region: str = "nord"
    spec_file: str | None = None
    cohort_size: int | None = None
    seed: int = 0
    grid_rows: int = 10
    grid_cols: int = 10
    total_steps: int | None = None
    eps0: float = 0.5
    eps_min: float = 0.01
    radius0: int = 5
    superclasses: int = 10
    mca_active: str = ",".join(register.ACTIVE_VARS)
    mca_supplementary: str = "age"
    outdir: str = "out"
    window_end: str = "1996-08-31"

    def validate(self) -> None:
        if self.grid_rows < 1 or self.grid_cols < 1:
            raise ConfigError("grid shape must be at least 1x1")
        if not 0 < self.eps_min <= self.eps0 < 1:
            raise ConfigError("need 0 < eps_min <= eps0 < 1")
        if self.radius0 < 0:
            raise ConfigError("radius0 must be >= 0")
        if self.total_steps is not None and self.total_steps < 0:
            raise ConfigError("total_steps must be >= 0")
        if not 1 <= self.superclasses <= self.grid_rows * self.grid_cols:
            raise ConfigError("superclasses must lie in 1..grid units")
        if self.cohort_size is not None and self.cohort_size < 1:
            raise ConfigError("cohort_size must be >= 1")
        for var in self.active_vars():
            if var not in register.QUAL_CODES:
                raise ConfigError(f"unknown MCA variable {var!r}")
        if self.mca_supplementary and \
                self.mca_supplementary not in register.QUAL_CODES:
            raise ConfigError(
                f"unknown supplementary variable {self.mca_supplementary!r}")
        try:
            date.fromisoformat(self.window_end)
        except ValueError:
            raise ConfigError(f"bad window_end {self.window_end!r}") from None

    def active_vars(self) -> tuple[str, ...]:
        return tuple(v.strip() for v in self.mca_active.split(",") if v.strip())


_CONFIG_FIELDS = {f.name: f for f in dataclasses.fields(PipelineConfig)}
_INT_FIELDS = {"cohort_size", "seed", "grid_rows", "grid_cols", "total_steps",
               "radius0", "superclasses"}
_FLOAT_FIELDS = {"eps0", "eps_min"}


def read_config(path) -> PipelineConfig:
    """Plain-text key = value config; unknown keys are errors."""
    config = PipelineConfig()
    try:
        fh = open(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            apply_setting(config, key.strip(), value.strip(),
                          where=f"{path}:{lineno}")
    config.validate()
    return config


def apply_setting(config: PipelineConfig, key: str, value: str,
                  where: str = "flag") -> None:
    if key not in _CONFIG_FIELDS:
        raise ConfigError(f"{where}: unknown key {key!r}")
    try:
        if value == "" or value.lower() == "none":
            parsed = None
        elif key in _INT_FIELDS:
            parsed = int(value)
        elif key in _FLOAT_FIELDS:
            parsed = float(value)
        else:
            parsed = value
    except ValueError:
        raise ConfigError(f"{where}: bad value for {key}: {value!r}") from None
    setattr(config, key, parsed)


def config_lines(config: PipelineConfig) -> list[str]:
    lines = []
    for f in dataclasses.fields(PipelineConfig):
        value = getattr(config, f.name)
        lines.append(f"config.{f.name} = "
                     f"{'' if value is None else value}")
    return lines


# --------------------------------------------------------------------------
# stages
# --------------------------------------------------------------------------

def stage_synth(config: PipelineConfig, out_csv) -> list[str]:
    spec = (synth.load_spec(config.spec_file) if config.spec_file
            else synth.bundled_spec(config.region))
    overrides = {"seed": config.seed}
    if config.cohort_size is not None:
        overrides["cohort_size"] = config.cohort_size
    spec = dataclasses.replace(spec, **overrides)
    records = synth.generate(spec)
    register.write_records(records, out_csv)
    logger.info("synth: %d records for %d individuals -> %s",
                len(records), spec.cohort_size, out_csv)
    return [out_csv]


def stage_ingest(register_csv, individuals_csv, window_end: date) -> list[str]:
    records = register.read_records(register_csv)
    class_means = register.compute_class_means(records)
    imputed = 0
    cleaned = []
    for rec in records:
        rec, count = register.impute_hours(rec, class_means) \
            if any(m.hours is None for m in rec.occasional) else (rec, 0)
        imputed += count
        cleaned.append(rec)
    individuals = register.collate(cleaned, window_end)
    register.write_individuals(individuals, individuals_csv)
    logger.info("ingest: %d records -> %d individuals (%d imputed cells)",
                len(records), len(individuals), imputed)
    return [individuals_csv]


def stage_features(individuals_csv, features_csv) -> list[str]:
    individuals = register.read_individuals(individuals_csv)
    feats = [register.build_features(ind) for ind in individuals]
    register.write_features([i.person_id for i in individuals], feats,
                            features_csv)
    logger.info("features: %d rows -> %s", len(feats), features_csv)
    return [features_csv]


def zscore(X: np.ndarray) -> np.ndarray:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std == 0] = 1.0
    return (X - mean) / std


def stage_train(features_csv, model_txt, assignment_csv,
                config: PipelineConfig) -> list[str]:
    ids, feats = register.read_features(features_csv)
    X = np.array([f.as_tuple() for f in feats])
    Z = zscore(X)
    steps = (config.total_steps if config.total_steps is not None
             else 20 * len(Z))
    schedule = som.TrainingSchedule(total_steps=steps, eps0=config.eps0,
                                    eps_min=config.eps_min,
                                    radius0=config.radius0, seed=config.seed)
    grid = som.init_grid(config.grid_rows, config.grid_cols, Z, config.seed)
    model = som.train(grid, Z, schedule)
    som.save_model(model, model_txt)
    assignment = som.classify(model.grid, Z)
    with open(assignment_csv, "w") as fh:
        fh.write("person_id,unit,distance\n")
        for pid, unit, dist in zip(ids, assignment.units,
                                   assignment.distances):
            fh.write(f"{pid},{unit},{dist:.17g}\n")
    quality = som.quality(model.grid, Z)
    logger.info("train: %d steps, qe %.4f, te %.4f", steps,
                quality["quantization_error"], quality["topographic_error"])
    return [model_txt, assignment_csv]


def read_assignment(path) -> tuple[list[str], np.ndarray]:
    ids, units = [], []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "person_id,unit,distance":
            raise DataError(f"{path}: unexpected assignment header")
        for line in fh:
            pid, unit, _ = line.split(",")
            ids.append(pid)
            units.append(int(unit))
    return ids, np.array(units, dtype=np.int64)


def stage_cluster(model_txt, tree_txt, superclasses_txt, connectivity_txt,
                  k: int) -> list[str]:
    model = som.load_model(model_txt)
    tree = superclass.ward_tree(model.grid.code_vectors)
    sc = superclass.cut(tree, k)
    superclass.write_tree(tree, tree_txt)
    superclass.write_superclasses(sc, superclasses_txt)
    report = superclass.connectivity_report(
        sc, (model.grid.n_rows, model.grid.n_cols))
    with open(connectivity_txt, "w") as fh:
        fh.write("super_class n_components component_sizes\n")
        for label in range(1, sc.k + 1):
            entry = report[label]
            sizes = "+".join(str(s) for s in entry["component_sizes"])
            fh.write(f"{label} {entry['n_components']} {sizes}\n")
    splits = [lab for lab, e in report.items() if e["n_components"] > 1]
    if splits:
        logger.info("cluster: split super-classes on the grid: %s", splits)
    logger.info("cluster: cut at k=%d -> %s", k, superclasses_txt)
    return [tree_txt, superclasses_txt, connectivity_txt]


def _load_classification(individuals_csv, features_csv, assignment_csv,
                         superclasses_txt):
    individuals = register.read_individuals(individuals_csv)
    ids, feats = register.read_features(features_csv)
    aids, units = read_assignment(assignment_csv)
    if aids != [i.person_id for i in individuals] or ids != aids:
        raise DataError("individuals, features and assignment files disagree "
                        "on person ids")
    sc = superclass.read_superclasses(superclasses_txt)
    return individuals, feats, units, sc


def stage_report(individuals_csv, features_csv, assignment_csv,
                 superclasses_txt, model_txt, outdir) -> list[str]:
    individuals, feats, units, sc = _load_classification(
        individuals_csv, features_csv, assignment_csv, superclasses_txt)
    model = som.load_model(model_txt)

    profile_csv = os.path.join(outdir, "profile.csv")
    prof = superclass.profile(sc, units, individuals, feats)
    _write_profile(prof, profile_csv)

    composition_txt = os.path.join(outdir, "composition.txt")
    profiles = [register.bracketize(ind, feat, sc.labels[unit])
                for ind, feat, unit in zip(individuals, feats, units)]
    tables = superclass.composition(sc, units, profiles,
                                    ("duration", "recurrence", "age", "skill",
                                     "education", "reason", "exit", "hours",
                                     "spells_year", "share"))
    _write_composition(tables, sc.k, composition_txt)

    plate_svg = os.path.join(outdir, "code_vectors.svg")
    plate = plot_code_vectors(model, sc, register.FEATURE_NAMES)
    plate.write(plate_svg)
    logger.info("report: profile, composition and code-vector plate -> %s",
                outdir)
    return [profile_csv, composition_txt, plate_svg]


def _write_profile(prof: dict, path) -> None:
    columns = prof["columns"]
    with open(path, "w") as fh:
        fh.write("super_class,size," + ",".join(columns) + "\n")
        for label, row in prof["classes"].items():
            cells = [("" if row["means"][c] is None else
                      f"{row['means'][c]:.17g}") for c in columns]
            fh.write(f"{label},{row['size']}," + ",".join(cells) + "\n")
        total = prof["total"]
        cells = [f"{total['means'][c]:.17g}" for c in columns]
        fh.write(f"total,{total['size']}," + ",".join(cells) + "\n")


def _write_composition(tables: dict, k: int, path) -> None:
    with open(path, "w") as fh:
        for var, table in tables.items():
            codes = table["codes"]
            fh.write(f"== {var}\n")
            fh.write("class " + " ".join(f"{c:>8}" for c in codes) + "\n")
            for label in list(range(1, k + 1)) + ["total"]:
                row = table["rows"][label]
                cells = []
                for code in codes:
                    value = row[code]
                    cells.append(f"{'.':>8}" if value is None or value == 0
                                 else f"{value:8.2f}")
                fh.write(f"{label!s:<5} " + " ".join(cells) + "\n")
            fh.write("\n")


def plot_code_vectors(model: som.SomModel, sc: superclass.SuperClassification,
                      var_names=None, cell_w: float = 72.0,
                      cell_h: float = 48.0, pad: float = 4.0) -> SvgCanvas:
    """Small-multiple plate: one cell per unit, a polyline over the code
    vector's values (variables in alphabetical order when names are given),
    background grey level encoding the super-class."""
    grid = model.grid
    code = grid.code_vectors
    if var_names is not None:
        if len(var_names) != grid.dim:
            raise DataError("variable names do not match the code dimension")
        order = np.argsort(np.array(var_names, dtype=object))
        code = code[:, order]
    margin = 18.0
    width = margin * 2 + cell_w * grid.n_cols
    height = margin * 2 + cell_h * grid.n_rows + 14.0
    canvas = SvgCanvas(width, height)
    vmin = float(code.min())
    vmax = float(code.max())
    span = vmax - vmin
    for unit in range(grid.n_units):
        row, col = unit // grid.n_cols, unit % grid.n_cols
        x0 = margin + col * cell_w
        y0 = margin + row * cell_h
        canvas.rect(x0, y0, cell_w, cell_h,
                    fill=grey_level(sc.labels[unit], sc.k),
                    stroke="#555555", stroke_width=0.5)
        points = []
        for i, value in enumerate(code[unit]):
            if grid.dim == 1:
                px = x0 + cell_w / 2
            else:
                px = x0 + pad + i * (cell_w - 2 * pad) / (grid.dim - 1)
            if span == 0:
                py = y0 + cell_h / 2
            else:
                py = y0 + pad + (vmax - value) * (cell_h - 2 * pad) / span
            points.append((px, py))
        canvas.polyline(points, stroke="#000000", stroke_width=0.8)
    if var_names is not None:
        names = sorted(var_names)
        canvas.text(margin, height - 5,
                    "variables (alphabetical): " + ", ".join(names), size=8.0)
    return canvas


def stage_mca(individuals_csv, features_csv, assignment_csv, superclasses_txt,
              outdir, active_vars, supplementary_var) -> list[str]:
    individuals, feats, units, sc = _load_classification(
        individuals_csv, features_csv, assignment_csv, superclasses_txt)
    profiles = [register.bracketize(ind, feat, sc.labels[unit])
                for ind, feat, unit in zip(individuals, feats, units)]
    indicator = mca_mod.build_indicator(profiles, active_vars)
    result = mca_mod.correspondence(mca_mod.burt(indicator),
                                    indicator.categories)
    sup_labels, sup_coords = (), None
    if supplementary_var:
        codes, counts = mca_mod.supplementary_counts(
            profiles, supplementary_var, indicator)
        sup_labels = codes
        sup_coords = mca_mod.project_supplementary(result, counts)
    coords_csv = os.path.join(outdir, "mca_coordinates.csv")
    mca_mod.write_coordinates(coords_csv, result, sup_labels, sup_coords)
    written = [coords_csv]
    for pair in ((1, 2), (2, 3)):
        if result.coordinates.shape[1] >= pair[1]:
            path = os.path.join(outdir, f"mca_plane_{pair[0]}_{pair[1]}.svg")
            plane_svg(result, pair, sup_labels, sup_coords).write(path)
            written.append(path)
    logger.info("mca: %d categories, %d axes -> %s",
                len(result.categories), result.coordinates.shape[1], outdir)
    return written


def plane_svg(result, pair, sup_labels=(), sup_coords=None,
              width: float = 640.0, height: float = 480.0) -> SvgCanvas:
    """Scatter of the category points on one factorial plane; supplementary
    categories drawn in grey italics."""
    ax, ay = pair[0] - 1, pair[1] - 1
    xs = result.coordinates[:, ax]
    ys = result.coordinates[:, ay]
    all_x = [xs]
    all_y = [ys]
    if sup_coords is not None:
        finite = ~np.isnan(sup_coords[:, ax])
        all_x.append(sup_coords[finite, ax])
        all_y.append(sup_coords[finite, ay])
    cx = np.concatenate(all_x)
    cy = np.concatenate(all_y)
    lo_x, hi_x = float(cx.min()), float(cx.max())
    lo_y, hi_y = float(cy.min()), float(cy.max())
    span_x = (hi_x - lo_x) or 1.0
    span_y = (hi_y - lo_y) or 1.0
    m = 40.0

    def sx(v):
        return m + (v - lo_x) * (width - 2 * m) / span_x

    def sy(v):
        return height - m - (v - lo_y) * (height - 2 * m) / span_y

    canvas = SvgCanvas(width, height)
    share = result.inertia_shares
    canvas.text(m, 14, f"axes {pair[0]} x {pair[1]} "
                f"(inertia {share[ax]:.3f} / {share[ay]:.3f})", size=10.0)
    if lo_x < 0 < hi_x:
        canvas.line(sx(0), m, sx(0), height - m)
    if lo_y < 0 < hi_y:
        canvas.line(m, sy(0), width - m, sy(0))
    for (var, code), x, y in zip(result.categories, xs, ys):
        canvas.circle(sx(x), sy(y), 1.6, fill="#222222")
        canvas.text(sx(x) + 2.5, sy(y) - 2.0, code, size=7.5)
    if sup_coords is not None:
        for code, row in zip(sup_labels, sup_coords):
            if np.isnan(row[ax]):
                continue
            canvas.circle(sx(row[ax]), sy(row[ay]), 1.6, fill="#999999")
            canvas.text(sx(row[ax]) + 2.5, sy(row[ay]) - 2.0, code, size=7.5,
                        fill="#777777", style="italic")
    return canvas


def stage_cda(features_csv, assignment_csv, superclasses_txt,
              outdir) -> list[str]:
    ids, feats = register.read_features(features_csv)
    aids, units = read_assignment(assignment_csv)
    if ids != aids:
        raise DataError("features and assignment files disagree on person ids")
    sc = superclass.read_superclasses(superclasses_txt)
    labels = np.array([sc.labels[u] for u in units])
    X = np.array([f.as_tuple() for f in feats])
    sd = cda_mod.scatter(X, labels)
    result = cda_mod.canonical(sd)
    means = cda_mod.class_means_on_canonicals(result, X, labels)
    cda_mod.write_tables(outdir, result, register.FEATURE_NAMES, means)
    logger.info("cda: %d components (largest share %.3f) -> %s",
                result.n_components, result.shares[0], outdir)
    return [os.path.join(outdir, name) for name in
            ("cda_eigenvalues.csv", "cda_coefficients.csv",
             "cda_class_means.csv")]


# --------------------------------------------------------------------------
# full run
# --------------------------------------------------------------------------

def run_pipeline(config: PipelineConfig) -> str:
    """Run every stage in order; returns the manifest path. Any stage error
    aborts with the stage name, removing files written so far."""
    config.validate()
    outdir = config.outdir
    os.makedirs(outdir, exist_ok=True)
    window_end = date.fromisoformat(config.window_end)
    written: list[str] = []

    def path(name):
        return os.path.join(outdir, name)

    stages = []
    if config.input is None:
        stages.append(("synth", lambda: stage_synth(config, path("register.csv"))))
        register_csv = path("register.csv")
    else:
        register_csv = config.input
    stages += [
        ("ingest", lambda: stage_ingest(register_csv, path("individuals.csv"),
                                        window_end)),
        ("features", lambda: stage_features(path("individuals.csv"),
                                            path("features.csv"))),
        ("train", lambda: stage_train(path("features.csv"),
                                      path("som_model.txt"),
                                      path("assignment.csv"), config)),
        ("cluster", lambda: stage_cluster(path("som_model.txt"),
                                          path("merge_tree.txt"),
                                          path("superclasses.txt"),
                                          path("connectivity.txt"),
                                          config.superclasses)),
        ("report", lambda: stage_report(path("individuals.csv"),
                                        path("features.csv"),
                                        path("assignment.csv"),
                                        path("superclasses.txt"),
                                        path("som_model.txt"), outdir)),
        ("mca", lambda: stage_mca(path("individuals.csv"),
                                  path("features.csv"),
                                  path("assignment.csv"),
                                  path("superclasses.txt"), outdir,
                                  config.active_vars(),
                                  config.mca_supplementary or None)),
        ("cda", lambda: stage_cda(path("features.csv"),
                                  path("assignment.csv"),
                                  path("superclasses.txt"), outdir)),
    ]
    try:
        for name, fn in stages:
            written.extend(fn())
    except Exception as exc:
        for f in written:
            if os.path.exists(f):
                os.remove(f)
        raise type(exc)(f"stage {name!r} failed: {exc}") from exc

    manifest = path("manifest.txt")
    with open(manifest, "w") as fh:
        for line in config_lines(config):
            fh.write(line + "\n")
        for f in sorted(written, key=os.path.basename):
            digest = hashlib.sha256(open(f, "rb").read()).hexdigest()
            fh.write(f"hash.{os.path.basename(f)} = {digest}\n")
    logger.info("run: manifest -> %s", manifest)
    return manifest
