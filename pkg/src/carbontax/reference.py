"""Published simulation moments used as replication targets.

Each entry holds five columns in the order of :data:`SCENARIO_COLUMNS`.
Means are in levels; standard deviations are of log levels, in percent.
Values are stored exactly as printed, so their precision is the printed one.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal

SCENARIO_COLUMNS = ("bau", "unconstrained", "constrained:0", "constrained:gamma", "constrained:1")
COLUMN_TITLES = ("BAU", "Unc. Opt. Policy", "Rebate to S (xi=0)", "Uniform Red. (xi=gamma)", "Red. to HtM (xi=1)")

#: Row label, as printed, for every variable key.
MEAN_ROW_LABELS = {
    "Y": "Y_t", "I": "I_t", "fY": "f(mu_t)Y_t", "C": "C_t", "CS": "C^S_t", "CH": "C^H_t",
    "VX": "V^X_t", "tau": "tau*_t", "E": "E_t", "tauE": "tau*_tE_t", "X": "X_t", "mu": "mu_t",
    "Wel": "W_t", "US": "U^S_t", "UH": "U^H_t",
}  # fmt: skip
STD_ROW_LABELS = {k: f"log({MEAN_ROW_LABELS.get(k, k)})" for k in ("Y", "I", "C", "CS", "CH", "lamH", "tau", "E", "VX")}
STD_ROW_LABELS["lamH"] = "log(lambda^H_t)"

QUANTITY_ROWS = ("Y", "I", "C", "CS", "CH", "E", "X", "mu", "fY", "tauE")
PRICE_ROWS = ("tau", "VX")
WELFARE_ROWS = ("Wel", "UH", "US")

# Numbers are kept as strings so the printed precision survives.
_TABLES: dict[tuple[str, str], tuple[str, dict[str, tuple[str, ...]]]] = {
    ("baseline", "means"): ("Table 2", {
        "Y": ("1.002", "0.996", "0.992", "0.995", "0.998"),
        "I": ("0.212", "0.208", "0.206", "0.208", "0.210"),
        "fY": ("0.000", "0.002", "0.005", "0.002", "0.001"),
        "C": ("0.790", "0.785", "0.781", "0.785", "0.787"),
        "CS": ("0.827", "0.785", "0.820", "0.820", "0.816"),
        "CH": ("0.641", "0.785", "0.623", "0.643", "0.675"),
        "VX": ("0.034", "0.020", "0.032", "0.031", "0.028"),
        "tau": ("0.000", "0.020", "0.032", "0.020", "0.010"),
        "E": ("1.001", "0.676", "0.580", "0.675", "0.780"),
        "tauE": ("0.000", "0.014", "0.019", "0.014", "0.008"),
        "X": ("476.84", "321.79", "276.13", "321.42", "371.54"),
        "mu": ("0.000", "0.322", "0.417", "0.322", "0.218"),
        "Wel": ("-108.65", "-69.895", "-74.368", "-77.856", "-81.622"),
        "US": ("-77.078", "-69.895", "-54.302", "-59.020", "-66.184"),
        "UH": ("-234.95", "-69.895", "-154.63", "-153.20", "-143.37"),
    }),
    ("baseline", "stds"): ("Table 3", {
        "Y": ("3.62", "3.68", "3.55", "3.54", "3.51"),
        "I": ("8.12", "8.53", "7.89", "7.84", "7.66"),
        "C": ("2.54", "2.55", "2.52", "2.51", "2.50"),
        "CS": ("2.35", "2.55", "2.35", "2.32", "2.22"),
        "CH": ("3.62", "2.55", "3.52", "3.57", "4.03"),
        "lamH": ("12.86", "0.00", "10.33", "11.53", "17.85"),
        "tau": ("0.00", "4.86", "3.76", "6.37", "13.06"),
        "E": ("2.52", "1.77", "1.99", "1.12", "0.66"),
        "VX": ("3.73", "4.86", "3.76", "3.65", "3.22"),
    }),
    ("gamma_low", "means"): ("Table A.1", {
        "Y": ("1.002", "0.996", "0.994", "0.995", "0.997"),
        "I": ("0.212", "0.208", "0.207", "0.208", "0.209"),
        "fY": ("0.000", "0.002", "0.003", "0.002", "0.001"),
        "C": ("0.790", "0.785", "0.783", "0.785", "0.787"),
        "CS": ("0.808", "0.785", "0.802", "0.802", "0.794"),
        "CH": ("0.642", "0.785", "0.626", "0.643", "0.726"),
        "VX": ("0.027", "0.020", "0.026", "0.025", "0.022"),
        "tau": ("0.000", "0.020", "0.026", "0.020", "0.014"),
        "E": ("1.001", "0.676", "0.628", "0.675", "0.739"),
        "tauE": ("0.000", "0.014", "0.016", "0.014", "0.010"),
        "X": ("476.91", "321.79", "299.10", "321.58", "352.14"),
        "mu": ("0.000", "0.322", "0.369", "0.322", "0.258"),
        "Wel": ("-101.37", "-69.895", "-72.427", "-74.006", "-74.369"),
        "US": ("-84.863", "-69.895", "-61.520", "-64.216", "-70.803"),
        "UH": ("-234.92", "-69.895", "-160.67", "-153.22", "-103.22"),
    }),
    ("gamma_low", "stds"): ("Table A.2", {
        "Y": ("3.68", "3.68", "3.61", "3.61", "3.50"),
        "I": ("8.43", "8.53", "8.19", "8.16", "7.65"),
        "C": ("2.55", "2.55", "2.53", "2.53", "2.48"),
        "CS": ("2.45", "2.55", "2.44", "2.43", "2.20"),
        "CH": ("3.68", "2.55", "3.58", "3.63", "5.20"),
        "lamH": ("13.03", "0.00", "10.67", "11.69", "44.57"),
        "tau": ("0.00", "4.86", "4.18", "5.69", "19.20"),
        "E": ("2.56", "1.77", "1.88", "1.39", "1.15"),
        "VX": ("4.30", "4.86", "4.18", "4.15", "3.42"),
    }),
    ("gamma_high", "means"): ("Table A.4", {
        "Y": ("1.002", "0.996", "0.988", "0.995", "0.998"),
        "I": ("0.212", "0.208", "0.204", "0.208", "0.210"),
        "fY": ("0.000", "0.002", "0.008", "0.002", "0.001"),
        "C": ("0.790", "0.785", "0.776", "0.785", "0.787"),
        "CS": ("0.863", "0.785", "0.854", "0.854", "0.850"),
        "CH": ("0.641", "0.785", "0.617", "0.643", "0.659"),
        "VX": ("0.050", "0.020", "0.046", "0.042", "0.040"),
        "tau": ("0.000", "0.020", "0.046", "0.020", "0.010"),
        "E": ("1.001", "0.676", "0.488", "0.675", "0.777"),
        "tauE": ("0.000", "0.014", "0.023", "0.014", "0.008"),
        "X": ("476.74", "321.79", "232.61", "321.19", "370.09"),
        "mu": ("0.000", "0.322", "0.507", "0.323", "0.221"),
        "Wel": ("-120.81", "-69.895", "-76.698", "-84.384", "-89.286"),
        "US": ("-64.579", "-69.895", "-43.433", "-50.503", "-56.064"),
        "UH": ("-234.98", "-69.895", "-144.24", "-153.17", "-156.74"),
    }),
    ("gamma_high", "stds"): ("Table A.5", {
        "Y": ("3.51", "3.68", "3.45", "3.44", "3.42"),
        "I": ("7.63", "8.53", "7.44", "7.34", "7.23"),
        "C": ("2.51", "2.55", "2.50", "2.48", "2.49"),
        "CS": ("2.18", "2.55", "2.20", "2.15", "2.08"),
        "CH": ("3.51", "2.55", "3.43", "3.47", "3.68"),
        "lamH": ("12.62", "0.00", "9.78", "11.29", "14.06"),
        "tau": ("0.00", "4.86", "3.32", "7.26", "11.14"),
        "E": ("2.45", "1.77", "2.29", "0.77", "0.83"),
        "VX": ("3.20", "4.86", "3.32", "3.08", "2.81"),
    }),
    ("theta1_high", "means"): ("Table A.7", {
        "Y": ("1.002", "0.995", "0.990", "0.995", "0.998"),
        "I": ("0.212", "0.208", "0.205", "0.208", "0.210"),
        "fY": ("0.000", "0.001", "0.003", "0.001", "0.000"),
        "C": ("0.790", "0.786", "0.782", "0.786", "0.788"),
        "CS": ("0.827", "0.786", "0.823", "0.821", "0.815"),
        "CH": ("0.641", "0.786", "0.620", "0.645", "0.680"),
        "VX": ("0.034", "0.020", "0.035", "0.031", "0.027"),
        "tau": ("0.000", "0.020", "0.035", "0.020", "0.010"),
        "E": ("1.001", "0.836", "0.778", "0.836", "0.889"),
        "tauE": ("0.000", "0.017", "0.027", "0.017", "0.009"),
        "X": ("476.84", "398.27", "370.40", "397.97", "423.23"),
        "mu": ("0.000", "0.161", "0.216", "0.161", "0.110"),
        "Wel": ("-108.65", "-81.078", "-91.70", "-91.245", "-90.418"),
        "US": ("-77.078", "-81.078", "-63.939", "-68.044", "-73.593"),
        "UH": ("-234.95", "-81.078", "-202.74", "-184.05", "-157.72"),
    }),
    ("theta1_high", "stds"): ("Table A.8", {
        "Y": ("3.62", "3.72", "3.58", "3.57", "3.51"),
        "I": ("8.12", "8.66", "8.02", "7.95", "7.66"),
        "C": ("2.54", "2.57", "2.54", "2.53", "2.51"),
        "CS": ("2.35", "2.57", "2.37", "2.33", "2.18"),
        "CH": ("3.62", "2.57", "3.55", "3.64", "4.27"),
        "lamH": ("12.86", "0.00", "11.04", "12.57", "21.18"),
        "tau": ("0.00", "5.08", "3.87", "6.85", "14.77"),
        "E": ("2.52", "2.23", "2.25", "1.88", "1.53"),
        "VX": ("3.73", "5.08", "3.87", "3.66", "3.05"),
    }),
    ("sigma_low", "means"): ("Table A.10", {
        "Y": ("1.001", "0.994", "0.993", "0.994", "0.996"),
        "I": ("0.212", "0.208", "0.207", "0.208", "0.209"),
        "fY": ("0.000", "0.002", "0.003", "0.002", "0.001"),
        "C": ("0.789", "0.784", "0.783", "0.784", "0.786"),
        "CS": ("0.827", "0.784", "0.822", "0.820", "0.811"),
        "CH": ("0.641", "0.784", "0.627", "0.642", "0.686"),
        "VX": ("0.024", "0.020", "0.024", "0.024", "0.022"),
        "tau": ("0.000", "0.020", "0.024", "0.020", "0.015"),
        "tauE": ("0.000", "0.014", "0.015", "0.014", "0.011"),
        "E": ("1.001", "0.676", "0.643", "0.676", "0.728"),
        "X": ("476.45", "321.85", "306.43", "321.80", "346.72"),
        "mu": ("0.000", "0.321", "0.353", "0.321", "0.270"),
        "Wel": ("-98.339", "-88.096", "-88.958", "-89.357", "-89.860"),
        "US": ("-85.917", "-88.096", "-77.764", "-79.595", "-81.735"),
        "UH": ("-128.49", "-88.096", "-114.64", "-112.52", "-105.71"),
    }),
    ("sigma_low", "stds"): ("Table A.11", {
        "Y": ("3.29", "3.34", "3.26", "3.25", "3.24"),
        "I": ("6.93", "7.32", "6.82", "6.80", "6.68"),
        "C": ("2.50", "2.52", "2.50", "2.50", "2.49"),
        "CS": ("2.37", "2.52", "2.39", "2.38", "2.31"),
        "CH": ("3.29", "2.52", "3.24", "3.26", "3.48"),
        "lamH": ("7.98", "0.000", "6.79", "7.40", "11.49"),
        "tau": ("0.00", "2.77", "2.54", "3.07", "5.42"),
        "E": ("2.29", "1.98", "1.99", "1.77", "1.35"),
        "VX": ("2.68", "2.77", "2.54", "2.53", "2.45"),
    }),
    ("chi_high", "means"): ("Table A.13", {
        "Y": ("1.004", "0.989", "0.982", "0.989", "0.994"),
        "I": ("0.213", "0.205", "0.201", "0.205", "0.207"),
        "fY": ("0.000", "0.008", "0.018", "0.008", "0.003"),
        "C": ("0.790", "0.777", "0.764", "0.776", "0.783"),
        "CS": ("0.827", "0.777", "0.803", "0.810", "0.802"),
        "CH": ("0.642", "0.777", "0.606", "0.640", "0.707"),
        "VX": ("0.156", "0.045", "0.075", "0.072", "0.057"),
        "tau": ("0.000", "0.045", "0.075", "0.045", "0.025"),
        "E": ("1.002", "0.498", "0.331", "0.497", "0.636"),
        "tauE": ("0.000", "0.022", "0.025", "0.022", "0.016"),
        "X": ("477.37", "237.26", "157.48", "236.47", "302.84"),
        "mu": ("0.000", "0.498", "0.665", "0.499", "0.360"),
        "Wel": ("-709.19", "-110.21", "-94.71", "-126.24", "-156.96"),
        "US": ("-315.55", "-110.21", "-66.69", "-91.18", "-132.10"),
        "UH": ("-2283.80", "-110.21", "-206.80", "-266.50", "-256.39"),
    }),
    ("chi_high", "stds"): ("Table A.14", {
        "Y": ("3.94", "3.75", "3.57", "3.56", "3.42"),
        "I": ("9.27", "8.77", "8.03", "7.89", "7.18"),
        "C": ("2.61", "2.53", "2.48", "2.45", "2.39"),
        "CS": ("2.38", "2.53", "2.30", "2.25", "1.91"),
        "CH": ("3.94", "2.53", "3.53", "3.54", "4.75"),
        "lamH": ("29.82", "0.000", "11.12", "13.77", "36.85"),
        "tau": ("0.00", "5.27", "3.58", "7.32", "21.42"),
        "E": ("2.74", "1.30", "2.71", "1.01", "3.81"),
        "VX": ("5.98", "5.27", "3.58", "3.36", "2.27"),
    }),
    ("eps_high", "means"): ("Table A.16", {
        "Y": ("1.002", "0.995", "0.991", "0.995", "0.998"),
        "I": ("0.212", "0.208", "0.206", "0.208", "0.21"),
        "fY": ("0", "0.002", "0.005", "0.002", "0.001"),
        "C": ("0.789", "0.784", "0.78", "0.784", "0.787"),
        "CS": ("0.827", "0.784", "0.82", "0.82", "0.815"),
        "CH": ("0.641", "0.784", "0.623", "0.643", "0.674"),
        "VX": ("0.034", "0.02", "0.032", "0.031", "0.028"),
        "tau": ("0", "0.02", "0.032", "0.02", "0.01"),
        "E": ("1.001", "0.675", "0.58", "0.675", "0.78"),
        "tauE": ("0", "0.014", "0.019", "0.014", "0.008"),
        "X": ("476.65", "321.45", "276.07", "321.27", "371.52"),
        "mu": ("0", "0.322", "0.416", "0.322", "0.218"),
        "Wel": ("-108.67", "-70.003", "-74.413", "-77.901", "-81.678"),
        "US": ("-77.233", "-70.003", "-54.404", "-59.126", "-66.314"),
        "UH": ("-234.44", "-70.003", "-154.45", "-153", "-143.13"),
    }),
    ("eps_high", "stds"): ("Table A.17", {
        "Y": ("3.13", "3.08", "3.04", "3.05", "3.04"),
        "I": ("5.43", "5.23", "5.00", "5.06", "5.03"),
        "C": ("2.51", "2.49", "2.47", "2.49", "2.50"),
        "CS": ("2.39", "2.49", "2.39", "2.37", "2.29"),
        "CH": ("3.13", "2.49", "2.97", "3.08", "3.51"),
        "lamH": ("7.19", "0.00", "4.79", "6.07", "11.29"),
        "tau": ("0.00", "6.36", "5.14", "7.09", "11.82"),
        "E": ("2.18", "0.81", "0.71", "0.62", "0.53"),
        "VX": ("5.22", "6.36", "5.14", "5.14", "4.73"),
    }),
}

PRESETS_WITH_REFERENCE = tuple(sorted({p for p, _ in _TABLES}))


@dataclass(frozen=True)
class ReferenceCell:
    table: str
    preset: str
    scenario: str
    variable: str
    value: float
    decimals: int
    source: str

    @property
    def half_unit(self) -> float:
        """Half a unit in the last printed decimal place."""
        return 0.5 * 10.0 ** (-self.decimals)


@dataclass(frozen=True)
class ReferenceTable:
    table: str
    preset: str
    source: str
    cells: tuple[ReferenceCell, ...]

    def get(self, scenario: str, variable: str) -> ReferenceCell:
        for c in self.cells:
            if c.scenario == scenario and c.variable == variable:
                return c
        raise KeyError((scenario, variable))

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(c.variable for c in self.cells))


def reference_table(table: str, preset: str = "baseline") -> ReferenceTable:
    """Embedded table ``"means"`` or ``"stds"`` for ``preset``.

    Raises
    ------
    KeyError
        If no table is embedded for the combination.
    """
    if table not in ("means", "stds", "welfare"):
        raise KeyError(f"unknown table {table!r}")
    key = (preset, "means" if table == "welfare" else table)
    if key not in _TABLES:
        raise KeyError(f"no reference {table} table for preset {preset!r}")
    source, rows = _TABLES[key]
    cells = []
    for var, values in rows.items():
        if table == "welfare" and var not in WELFARE_ROWS:
            continue
        for scen, text in zip(SCENARIO_COLUMNS, values):
            d = Decimal(text)
            decimals = max(0, -d.as_tuple().exponent)
            cells.append(ReferenceCell(table, preset, scen, var, float(d), decimals, source))
    return ReferenceTable(table, preset, source, tuple(cells))
