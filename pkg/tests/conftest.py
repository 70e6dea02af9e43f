import pytest

from iontrap.electrostatics.fivewire import FiveWireTemplate


@pytest.fixture(scope="session")
def long_rail_template():
    """Symmetric RF-only five-wire with long rails: the null sits near sqrt(ab)."""
    return FiveWireTemplate(center_width=120e-6, rf_width=160e-6, rf_amplitude=100.0, endcap_voltage=0.0,
                            middle_dc_voltage=0.0, dc_width=1000e-6, middle_dc_length=400e-6,
                            endcap_length=1000e-6, rail_length=40e-3)


@pytest.fixture(scope="session")
def confining_template():
    """Default template: DC endcaps give a closed 3-D well."""
    return FiveWireTemplate()
