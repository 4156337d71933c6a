import pytest

from failscope.config import ExecutionLimits
from failscope.exceptions import AssemblyParseException, ProgramValidationException
from failscope.vm import (
    ExecutionState,
    Instruction,
    Machine,
    Opcode,
    Program,
    ScriptedPorts,
    Status,
    format_program,
    parse_program,
    run,
    step,
    validate,
)
from failscope.vm.machine import DIVIDE_BY_ZERO, MEMORY_FAULT

from .constants import COUNTDOWN_INSTRUCTIONS


def _program(*blocks: str, memory: int = 4) -> Program:
    lines = [f".memory {memory}"]
    for index, body in enumerate(blocks):
        lines.append(f"L{index}:")
        lines.extend(f"    {line.strip()}" for line in body.split(";"))
    return parse_program("\n".join(lines))


def test_countdown_runs_to_halt(countdown: Program) -> None:
    ports = ScriptedPorts()
    state, status = run(countdown, ports)
    assert status is Status.HALTED
    assert state.instructions_executed == COUNTDOWN_INSTRUCTIONS
    assert ports.writes == [(8, 2), (8, 1), (8, 0)]
    assert state.memory[0] == 0


class TestArithmetic:
    def test_wraps_to_64_bits(self) -> None:
        program = _program(f"LOADI r0, {2**63 - 1}; ADD r0, r0, 1; MUL r1, r0, 2; HALT")
        state, _ = run(program, ScriptedPorts())
        assert state.registers[0] == -(2**63)
        assert state.registers[1] == 0

    @pytest.mark.parametrize(
        ("dividend", "divisor", "quotient"),
        [(-7, 2, -3), (7, -2, -3), (7, 2, 3), (-7, -2, 3)],
    )
    def test_division_truncates_towards_zero(self, dividend: int, divisor: int, quotient: int) -> None:
        program = _program(f"LOADI r0, {dividend}; LOADI r1, {divisor}; DIV r2, r0, r1; HALT")
        state, _ = run(program, ScriptedPorts())
        assert state.registers[2] == quotient

    def test_compare_and_branch(self) -> None:
        program = _program("LOADI r0, 0; CMP r0, 1; BR LE, L2", "OUT 8, r0; HALT", "LOADI r1, 1; OUT 9, r1; HALT")
        ports = ScriptedPorts()
        run(program, ports)
        assert ports.writes == [(9, 1)]


class TestCrashes:
    def test_divide_by_zero_leaves_pc_on_faulting_instruction(self) -> None:
        program = _program("LOADI r0, 4; DIV r1, r0, 0; HALT")
        state, status = run(program, ScriptedPorts())
        assert status is Status.CRASHED
        assert state.crash_reason == DIVIDE_BY_ZERO
        assert state.pc == (0, 1)
        assert state.instructions_executed == 1

    def test_register_indirect_access_out_of_range(self) -> None:
        program = _program("LOADI r1, 5; LOAD r0, [r1+0]; HALT", memory=4)
        state, status = run(program, ScriptedPorts())
        assert status is Status.CRASHED
        assert state.crash_reason == MEMORY_FAULT
        assert state.pc == (0, 1)

    def test_step_does_not_retire_a_crashing_instruction(self) -> None:
        program = _program("DIV r1, r0, r0; HALT")
        initial = ExecutionState.initial(program)
        crashed = step(initial, program, ScriptedPorts())
        assert crashed.status is Status.CRASHED
        assert crashed.instructions_executed == 0
        assert initial.status is Status.RUNNING

    def test_step_rejects_a_finished_execution(self) -> None:
        program = _program("HALT")
        halted = step(ExecutionState.initial(program), program, ScriptedPorts())
        with pytest.raises(ValueError):
            step(halted, program, ScriptedPorts())


class TestLimits:
    def test_instruction_budget(self) -> None:
        program = _program("NOP; JMP L0")
        state, status = run(program, ScriptedPorts(), ExecutionLimits(max_instructions=10))
        assert status is Status.TIMED_OUT
        assert state.instructions_executed == 10

    def test_simulated_time_budget(self) -> None:
        program = _program("SLEEP 1.0; JMP L0")
        state, status = run(program, ScriptedPorts(), ExecutionLimits(max_sim_seconds=2.5))
        assert status is Status.TIMED_OUT
        assert state.sim_clock == pytest.approx(3.0)
        assert state.instructions_executed == 5

    def test_invalid_limits(self) -> None:
        with pytest.raises(ValueError):
            ExecutionLimits(max_instructions=0)


def test_advance_stops_at_each_sleep() -> None:
    program = _program("SLEEP 0.25; SLEEP 0.5; HALT")
    machine = Machine(program, ScriptedPorts())
    assert machine.advance() == 0.25
    assert machine.advance() == 0.5
    assert machine.advance() is None
    assert machine.state.status is Status.HALTED


def test_scripted_ports() -> None:
    ports = ScriptedPorts({0: [1, 2]}, default=7)
    assert [ports.read(0) for _ in range(3)] == [1, 2, 7]
    assert ports.read(5) == 7
    cycling = ScriptedPorts({0: [1, 2]}, cycle=True)
    assert [cycling.read(0) for _ in range(5)] == [1, 2, 1, 2, 1]


class TestValidation:
    @pytest.mark.parametrize(
        ("blocks", "memory", "message"),
        [
            ([[], [Instruction(opcode=Opcode.HALT)]], 0, "empty block"),
            (
                [[Instruction(opcode=Opcode.JMP, target=0), Instruction(opcode=Opcode.HALT)]],
                0,
                "JMP before the end of the block",
            ),
            ([[Instruction(opcode=Opcode.NOP)]], 0, "control falls through past the last block"),
            ([[Instruction(opcode=Opcode.JMP, target=5)]], 0, "branch target 5 out of range"),
            (
                [[Instruction(opcode=Opcode.OUT, port=300, src=0), Instruction(opcode=Opcode.HALT)]],
                0,
                "port 300 out of range",
            ),
            ([[Instruction(opcode=Opcode.LOAD, dst=0, addr=2), Instruction(opcode=Opcode.HALT)]], 2, "address 2"),
        ],
    )
    def test_defects(self, blocks: list, memory: int, message: str) -> None:
        report = validate(Program.from_blocks(blocks, memory_size=memory))
        assert not report.ok
        assert any(message in defect.message for defect in report.defects)

    def test_bundled_controller_is_valid(self, controller: Program) -> None:
        assert validate(controller).ok

    def test_machine_refuses_invalid_program(self) -> None:
        with pytest.raises(ProgramValidationException):
            Machine(Program.from_blocks([[Instruction(opcode=Opcode.NOP)]]), ScriptedPorts())


class TestAssembly:
    def test_unknown_mnemonic_reports_line(self) -> None:
        with pytest.raises(AssemblyParseException) as error:
            parse_program(".memory 1\nL0:\n    FROB r0\n    HALT\n")
        assert error.value.line_number == 3

    @pytest.mark.parametrize("operand", ["010", "1.5", "0x", "--1"])
    def test_malformed_integer_reports_line(self, operand: str) -> None:
        with pytest.raises(AssemblyParseException) as error:
            parse_program(f".memory 1\nL0:\n    LOADI r0, 5\n    LOADI r1, {operand}\n    HALT\n")
        assert error.value.line_number == 4

    def test_integer_forms(self) -> None:
        program = parse_program(".memory 1\nL0:\n    LOADI r0, 0x1F\n    LOADI r1, -0\n    LOADI r2, -12\n    HALT\n")
        assert [instruction.imm for instruction in program.blocks[0].instructions[:3]] == [31, 0, -12]

    def test_labels_must_be_in_order(self) -> None:
        with pytest.raises(AssemblyParseException):
            parse_program("L1:\n    HALT\n")

    def test_formatted_controller_parses_back(self, controller: Program) -> None:
        assert parse_program(format_program(controller)) == controller

    def test_controller_layout(self, controller: Program) -> None:
        assert controller.base_addr == 0x1000
        assert controller.metadata.version == "v1"
        assert controller.blocks[1].start_addr == 0x1000 + len(controller.blocks[0].instructions)
