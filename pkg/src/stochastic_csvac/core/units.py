"""
Simulation unit system.

Internally energies are in kT, voltages in V_T = kT/q, times in the unit time
beta*hbar, rates in 1/(beta*hbar), currents in q/(beta*hbar) and powers in
kT/(beta*hbar). Because q*V_T = kT, a voltage in V_T and the matching energy in kT
share the same number. SI only appears at I/O boundaries through UnitSystem.
"""

from dataclasses import dataclass

# Physical constants
BOLTZMANN_J_PER_K = 1.380649e-23
ELECTRON_CHARGE_C = 1.6e-19
HBAR_J_S = 1.054571817e-34
ROOM_TEMPERATURE_K = 300.0


@dataclass(frozen=True)
class UnitSystem:
    """Fixed-temperature unit conventions and their SI values."""
    temperature_kelvin: float
    thermal_energy_joule: float
    thermal_voltage_volt: float
    unit_time_second: float
    electron_charge_coulomb: float

    def __post_init__(self):
        for name in ('temperature_kelvin', 'thermal_energy_joule', 'thermal_voltage_volt',
                     'unit_time_second', 'electron_charge_coulomb'):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @classmethod
    def default(cls) -> 'UnitSystem':
        """The T = 300 K system used throughout the package."""
        kt = BOLTZMANN_J_PER_K * ROOM_TEMPERATURE_K
        return cls(
            temperature_kelvin=ROOM_TEMPERATURE_K,
            thermal_energy_joule=kt,
            thermal_voltage_volt=kt / ELECTRON_CHARGE_C,
            unit_time_second=HBAR_J_S / kt,
            electron_charge_coulomb=ELECTRON_CHARGE_C,
        )

    @property
    def beta(self) -> float:
        """1/kT in 1/J."""
        return 1.0 / self.thermal_energy_joule

    def volts_to_vt(self, volts: float) -> float:
        return volts / self.thermal_voltage_volt

    def vt_to_volts(self, vt: float) -> float:
        return vt * self.thermal_voltage_volt

    def seconds_to_units(self, seconds: float) -> float:
        return seconds / self.unit_time_second

    def units_to_seconds(self, t: float) -> float:
        return t * self.unit_time_second

    def power_to_watts(self, p: float) -> float:
        """kT/(beta*hbar) -> W."""
        return p * self.thermal_energy_joule / self.unit_time_second

    def current_to_amperes(self, j: float) -> float:
        """q/(beta*hbar) -> A."""
        return j * self.electron_charge_coulomb / self.unit_time_second


DEFAULT_UNITS = UnitSystem.default()
