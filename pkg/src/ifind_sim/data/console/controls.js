// Operator controls: jog sliders, view picker, sweep launcher, the
// always-available estop, and the questionnaire form. Every control
// emits exactly one wire command through the session; acks and errors
// land back in the status line.
const JOG_STEP = 0.1; // rad or m per click
export function buildControls(root, session, hello) {
    root.innerHTML = "";
    const status = document.createElement("div");
    status.className = "status-line";
    status.textContent = "connected";
    session.onOutcome((outcome) => {
        status.textContent = outcome.ok
            ? `${outcome.kind} ok (tick ${outcome.tick})`
            : `${outcome.kind} rejected: ${outcome.error}`;
        status.classList.toggle("error", !outcome.ok);
    });
    session.onGap((count) => {
        status.textContent = `telemetry gap (${count} so far)`;
        status.classList.add("error");
    });
    // Emergency stop and reset: reachable from every screen, one click.
    const safetyRow = document.createElement("div");
    safetyRow.className = "row safety-row";
    const estop = document.createElement("button");
    estop.id = "estop";
    estop.className = "estop";
    estop.textContent = "EMERGENCY STOP";
    estop.onclick = () => session.estop();
    const reset = document.createElement("button");
    reset.id = "reset";
    reset.textContent = "reset";
    reset.onclick = () => session.reset();
    const homeBtn = document.createElement("button");
    homeBtn.id = "home";
    homeBtn.textContent = "home";
    homeBtn.onclick = () => session.home();
    safetyRow.append(estop, reset, homeBtn);
    root.append(status, safetyRow);
    // Jog sliders: one per joint; each release emits one jog command with
    // the delta between the slider and the current joint value.
    const jogBox = document.createElement("fieldset");
    jogBox.innerHTML = "<legend>jog</legend>";
    hello.joints.forEach((joint, index) => {
        const row = document.createElement("div");
        row.className = "row";
        const label = document.createElement("label");
        label.textContent = joint.id;
        const slider = document.createElement("input");
        slider.type = "range";
        slider.min = String(joint.limits[0]);
        slider.max = String(joint.limits[1]);
        slider.step = "0.01";
        slider.value = String(joint.home);
        slider.dataset.joint = joint.id;
        session.onFrame((frame) => {
            if (document.activeElement !== slider) {
                slider.value = String(frame.joints[index]);
            }
        });
        slider.onchange = () => {
            const current = session.frame?.joints[index] ?? joint.home;
            const delta = Number(slider.value) - current;
            if (Math.abs(delta) > 1e-9)
                session.jog(joint.id, delta);
        };
        const minus = document.createElement("button");
        minus.textContent = "−";
        minus.onclick = () => session.jog(joint.id, -JOG_STEP);
        const plus = document.createElement("button");
        plus.textContent = "+";
        plus.onclick = () => session.jog(joint.id, JOG_STEP);
        row.append(label, minus, slider, plus);
        jogBox.append(row);
    });
    root.append(jogBox);
    // View picker + go + grade.
    const viewBox = document.createElement("fieldset");
    viewBox.innerHTML = "<legend>standard views</legend>";
    const picker = document.createElement("select");
    picker.id = "view-picker";
    for (const name of Object.keys(hello.views)) {
        const option = document.createElement("option");
        option.value = name;
        option.textContent = name;
        picker.append(option);
    }
    const go = document.createElement("button");
    go.id = "view-go";
    go.textContent = "go";
    go.onclick = () => session.goToView(picker.value);
    const grade = document.createElement("button");
    grade.id = "view-grade";
    grade.textContent = "grade";
    grade.onclick = () => session.gradeView(picker.value);
    viewBox.append(picker, go, grade);
    root.append(viewBox);
    // Sweep launcher.
    const sweepBox = document.createElement("fieldset");
    sweepBox.innerHTML = "<legend>sweeps</legend>";
    if (hello.sweeps.length === 0) {
        const none = document.createElement("span");
        none.textContent = "no sweeps in this scenario";
        sweepBox.append(none);
    }
    for (const name of hello.sweeps) {
        const button = document.createElement("button");
        button.className = "sweep-launch";
        button.dataset.sweep = name;
        button.textContent = `sweep: ${name}`;
        button.onclick = () => session.launchSweep(name);
        sweepBox.append(button);
    }
    root.append(sweepBox);
    // Questionnaire: all seven answers required before submit unlocks.
    const form = document.createElement("fieldset");
    form.id = "questionnaire";
    form.innerHTML = "<legend>volunteer questionnaire (0–4)</legend>";
    const selects = [];
    for (const [key, text] of Object.entries(hello.questions)) {
        const row = document.createElement("div");
        row.className = "row question";
        const label = document.createElement("label");
        label.textContent = `${key}: ${text}`;
        const select = document.createElement("select");
        select.dataset.question = key;
        const blank = document.createElement("option");
        blank.value = "";
        blank.textContent = "—";
        select.append(blank);
        for (let level = 0; level <= 4; level++) {
            const option = document.createElement("option");
            option.value = String(level);
            option.textContent = String(level);
            select.append(option);
        }
        selects.push(select);
        row.append(label, select);
        form.append(row);
    }
    const submit = document.createElement("button");
    submit.id = "questionnaire-submit";
    submit.textContent = "submit questionnaire";
    submit.disabled = true;
    const refresh = () => {
        submit.disabled = selects.some((s) => s.value === "");
    };
    selects.forEach((s) => (s.onchange = refresh));
    submit.onclick = () => {
        session.submitQuestionnaire("console", hello.preset === "ifind-v3" ? "v3" : "v2", selects.map((s) => Number(s.value)));
        selects.forEach((s) => (s.value = ""));
        refresh();
    };
    form.append(submit);
    root.append(form);
    // Motion controls disabled while faulted (estop/reset stay live).
    session.onFrame((frame) => {
        const faulted = frame.mode === "FAULT";
        root.querySelectorAll("button, input, select").forEach((el) => {
            const element = el;
            if (element.id === "estop" || element.id === "reset")
                return;
            if (element.closest("#questionnaire"))
                return;
            element.disabled = faulted;
        });
        if (!faulted)
            refresh();
    });
}
