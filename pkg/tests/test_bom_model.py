import pytest

from subsbom.bom_model import (
    SERIAL_NUMBER_PROPERTY,
    BomMetadata,
    Component,
    ComponentType,
    CycleDetected,
    DanglingRef,
    DependencyEntry,
    InvalidBom,
    ServiceEntry,
    SubsBom,
    check_bom,
    dependency_graph,
    max_depth,
)
from subsbom.scl_model import ServiceKind

SERIAL = "urn:uuid:11111111-2222-4333-8444-555555555555"

SUB = Component(
    bom_ref="substation:S", component_type=ComponentType.SUBSTATION, name="S"
)


def _component(ref: str, ctype: ComponentType, **kwargs) -> Component:
    return Component(bom_ref=ref, component_type=ctype, name=ref.split(":", 1)[1], **kwargs)


def _bom(components=(), dependencies=(), services=(), serial=SERIAL) -> SubsBom:
    return SubsBom(
        serial_number=serial,
        metadata=BomMetadata(timestamp="2024-01-01T00:00:00Z", component=SUB),
        components=tuple(components),
        services=tuple(services),
        dependencies=tuple(dependencies),
    )


def _two_device_bom() -> SubsBom:
    return _bom(
        components=[
            _component("device:A", ComponentType.DEVICE),
            _component("firmware:A", ComponentType.FIRMWARE),
            _component("device:B", ComponentType.DEVICE),
            _component("firmware:B", ComponentType.FIRMWARE),
        ],
        dependencies=[
            DependencyEntry("substation:S", ("device:A", "device:B")),
            DependencyEntry("device:A", ("firmware:A",)),
            DependencyEntry("device:B", ("firmware:B",)),
        ],
    )


class TestGraph:
    def test_two_devices_two_firmware(self):
        graph = dependency_graph(_two_device_bom())
        assert len(graph) == 5
        assert sum(len(t) for t in graph.values()) == 4
        assert max_depth(_two_device_bom()) == 3

    def test_empty_bom(self):
        bom = _bom(dependencies=[DependencyEntry("substation:S", ())])
        graph = dependency_graph(bom)
        assert graph == {"substation:S": ()}
        assert max_depth(bom) == 1

    def test_devices_without_firmware(self):
        bom = _bom(
            components=[_component("device:A", ComponentType.DEVICE)],
            dependencies=[
                DependencyEntry("substation:S", ("device:A",)),
                DependencyEntry("device:A", ()),
            ],
        )
        assert max_depth(bom) == 2

    def test_cycle_detected(self):
        bom = _bom(
            components=[
                _component("device:D", ComponentType.DEVICE),
                _component("firmware:F", ComponentType.FIRMWARE),
            ],
            dependencies=[
                DependencyEntry("device:D", ("firmware:F",)),
                DependencyEntry("firmware:F", ("device:D",)),
            ],
        )
        with pytest.raises(CycleDetected):
            dependency_graph(bom)

    def test_dangling_ref(self):
        bom = _bom(dependencies=[DependencyEntry("substation:S", ("device:GHOST",))])
        with pytest.raises(DanglingRef):
            dependency_graph(bom)

    def test_dangling_source_ref(self):
        bom = _bom(dependencies=[DependencyEntry("device:GHOST", ())])
        with pytest.raises(DanglingRef):
            dependency_graph(bom)


class TestCheckBom:
    def test_valid(self):
        check_bom(_two_device_bom())

    def test_bad_serial(self):
        with pytest.raises(InvalidBom):
            check_bom(_bom(serial="urn:uuid:not-a-uuid"))

    def test_duplicate_refs(self):
        bom = _bom(
            components=[
                _component("device:A", ComponentType.DEVICE),
                _component("device:A", ComponentType.DEVICE),
            ]
        )
        with pytest.raises(InvalidBom):
            check_bom(bom)

    def test_substation_only_in_metadata(self):
        bom = _bom(components=[_component("substation:T", ComponentType.SUBSTATION)])
        with pytest.raises(InvalidBom):
            check_bom(bom)

    def test_metadata_component_must_be_substation(self):
        bom = SubsBom(
            serial_number=SERIAL,
            metadata=BomMetadata(
                timestamp="2024-01-01T00:00:00Z",
                component=_component("device:X", ComponentType.DEVICE),
            ),
        )
        with pytest.raises(InvalidBom):
            check_bom(bom)

    def test_firmware_must_not_carry_serial_property(self):
        bom = _bom(
            components=[
                Component(
                    bom_ref="firmware:A",
                    component_type=ComponentType.FIRMWARE,
                    name="A fw",
                    properties=((SERIAL_NUMBER_PROPERTY, "123"),),
                )
            ]
        )
        with pytest.raises(InvalidBom):
            check_bom(bom)

    def test_self_dependency(self):
        bom = _bom(
            components=[_component("device:A", ComponentType.DEVICE)],
            dependencies=[DependencyEntry("device:A", ("device:A",))],
        )
        with pytest.raises(InvalidBom):
            check_bom(bom)

    def test_unresolved_dependency(self):
        bom = _bom(dependencies=[DependencyEntry("substation:S", ("device:NOPE",))])
        with pytest.raises(InvalidBom):
            check_bom(bom)

    def test_service_provider_must_be_device(self):
        service = ServiceEntry(
            bom_ref="service:S:MMS",
            name="S MMS",
            provider_ref="substation:S",
            kind=ServiceKind.MMS,
        )
        with pytest.raises(InvalidBom):
            check_bom(_bom(services=[service]))

    def test_service_ref_collision_with_component(self):
        bom = _bom(
            components=[_component("device:A", ComponentType.DEVICE)],
            services=[
                ServiceEntry(
                    bom_ref="device:A",
                    name="clash",
                    provider_ref="device:A",
                    kind=ServiceKind.MMS,
                )
            ],
        )
        with pytest.raises(InvalidBom):
            check_bom(bom)
